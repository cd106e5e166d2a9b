#pragma once

// Implicit Euler for u_t in -dF(u) + f and checks of the dynamic properties
// (mass, contraction, decay, extinction) on computed trajectories.

#include "rwflow/functionals.hpp"
#include "rwflow/prox.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwflow {

using Source = std::function<VertexFunction(double)>;

struct FlowProblem {
  Functional functional;
  VertexFunction u0;
  Source source;  // empty means f = 0
  double T = 1.0;
  double h = 1e-3;
  double tol = 1e-9;
};

struct Diagnostics {
  double mass = 0.0;
  double energy = 0.0;
  double dist_l1 = 0.0;  // |u - mean|_{L^1(metric)}
  double dist_l2 = 0.0;  // |u - mean|_{L^2(metric)}
};

Diagnostics diagnose(const EnergyModel& model, const VertexFunction& u);

struct Trajectory {
  Vec metric;
  std::vector<double> times;
  std::vector<VertexFunction> states;
  std::vector<Diagnostics> diagnostics;
  std::vector<SubgradientCertificate> certificates;  // one per step
  std::vector<VertexFunction> sources;               // f(t_k) per step, empty when f = 0
  double tol = 0.0;

  std::size_t size() const { return times.size(); }
};

class FlowError : public std::runtime_error {
 public:
  FlowError(const std::string& what, int step, double stationarity, double complementarity)
      : std::runtime_error(what), step_(step), stationarity_(stationarity),
        complementarity_(complementarity) {}
  int step() const { return step_; }
  double stationarity() const { return stationarity_; }
  double complementarity() const { return complementarity_; }

 private:
  int step_;
  double stationarity_;
  double complementarity_;
};

/// Uniform grid 0, h, 2h, ... with a final shorter step landing on T.
std::vector<double> time_grid(double T, double h);

Trajectory implicit_euler(const EnergyModel& model, const VertexFunction& u0, double T, double h,
                          double tol, const Source& source = {});
Trajectory implicit_euler(const FlowProblem& problem);

struct ContractionReport {
  double q = 1.0;
  double max_excess = 0.0;  // max over t of lhs - (initial gap + source gap)
  double at_time = 0.0;
  bool holds(double allowance) const { return max_excess <= allowance; }
};

/// |(u - w)^+|_{L^q} <= |(u0 - w0)^+|_{L^q} + sum h |(f - g)^+|_{L^q}.
ContractionReport check_contraction(const Trajectory& a, const Trajectory& b, double q);

struct ConservationReport {
  double max_drift = 0.0;
  double bound = 0.0;  // n * tol * T / h
  bool holds() const { return max_drift <= bound; }
};

ConservationReport conservation_report(const Trajectory& traj);

/// Smallest grid time after which |u - mean|_{L^2} <= eps at every later sample.
std::optional<double> extinction_time(const Trajectory& traj, double eps);

enum class DecayMode { OnePoincare, TwoPoincare, QTwoPoincare };

struct DecayReport {
  DecayMode mode = DecayMode::TwoPoincare;
  double max_violation = 0.0;  // max over t of observed - bound (negative when the bound holds)
  double at_time = 0.0;
  double predicted_extinction = 0.0;  // where the bound reaches zero (infinity for q = 2)
  bool holds(double slack) const { return max_violation <= slack; }
};

/// q is the exponent of the TV-side structure for the (q,2) mode.
DecayReport decay_bound_check(const Trajectory& traj, double lambda, DecayMode mode, double q = 1.0);

DecayMode parse_decay_mode(const std::string& name);

/// Largest deviation between stored diagnostics and values recomputed from the states.
double diagnostics_drift(const EnergyModel& model, const Trajectory& traj);

}  // namespace rwflow
