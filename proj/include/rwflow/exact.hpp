#pragma once

// Event-driven integration of flows with total variation terms on finite
// graphs. Within a mode the cluster values follow a smooth ODE; merges
// (cluster values meeting across a signed edge) and splits (an internal dual
// value saturating) end the mode.

#include "rwflow/flow.hpp"
#include "rwflow/modes.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace rwflow {

struct ExactOptions {
  double sample_dt = 1e-3;   // spacing of the sampled trajectory
  double ode_tol = 1e-10;    // local tolerance of the explicit integrator
  double event_tol = 1e-10;  // events closer than this are processed together
  double time_tol = 1e-14;   // bracketing width for event location
};

class DenseSolution {
 public:
  virtual ~DenseSolution() = default;
  virtual Vec at(double t) const = 0;
};

/// exp([[A, b], [0, 0]] (t - t0)) applied to (c0, 1).
class AffineSolution : public DenseSolution {
 public:
  AffineSolution(double t0, Vec c0, const Mat& a, const Vec& b);
  Vec at(double t) const override;

 private:
  double t0_;
  Vec c0_;
  Mat aug_;
};

/// Piecewise cubic Hermite interpolation through accepted integrator steps.
class HermiteSolution : public DenseSolution {
 public:
  void push(double t, Vec c, Vec dc);
  Vec at(double t) const override;
  std::size_t knots() const { return t_.size(); }

 private:
  std::vector<double> t_;
  std::vector<Vec> c_;
  std::vector<Vec> dc_;
};

struct ModeSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  ClusterStructure structure;
  std::shared_ptr<const DenseSolution> solution;
  std::string end;  // merge | split | horizon

  Vec cluster_state(double t) const { return solution->at(t); }
  VertexFunction state(double t) const { return expand(structure, solution->at(t)); }
};

struct ExactEvent {
  double t = 0.0;
  std::string kind;  // merge | split
  std::vector<std::pair<int, int>> edges;
  VertexFunction state;
};

struct ExactResult {
  std::vector<ModeSegment> segments;
  std::vector<ExactEvent> events;
  Trajectory trajectory;  // sampled on the uniform grid
  VertexFunction final_state;

  VertexFunction state_at(double t) const;
};

class CyclingError : public ModeError {
 public:
  using ModeError::ModeError;
};

ExactResult integrate_exact(const EnergyModel& model, const VertexFunction& u0, double T,
                            const ExactOptions& options = {});
ExactResult integrate_exact(const Functional& functional, const VertexFunction& u0, double T,
                            const ExactOptions& options = {});

/// Internal dual values of a segment at time t, recovered from the reduced velocity.
InternalDual segment_dual(const EnergyModel& model, const ModeSegment& segment, double t);

}  // namespace rwflow
