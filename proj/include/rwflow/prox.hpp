#pragma once

// Proximal resolvent u = argmin F(w) + |w - v|^2_{L^2(metric)} / (2 lambda)
// with a certificate (v - u) / lambda in dF(u).
//
// Diagonally preconditioned primal-dual iterations locate the sign pattern;
// an active-set polish then solves the reduced smooth problem on the clusters
// of equal values and recovers the dual values on the zero edges exactly.

#include "rwflow/functionals.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rwflow {

struct ProxOptions {
  double tol = 1e-9;
  int max_iter = 200000;
  int polish_every = 50;
  kernels::Backend backend = kernels::Backend::OpenMP;
};

struct ProxResult {
  VertexFunction u;
  VertexFunction subgradient;           // (v - u) / lambda
  SubgradientCertificate certificate;   // dual values and residuals
  std::vector<std::int8_t> pattern;     // sign pattern of the polished solution (empty if unpolished)
  int iterations = 0;
  bool polished = false;
};

class ProxNonConvergence : public std::runtime_error {
 public:
  ProxNonConvergence(const std::string& what, VertexFunction best, double stationarity,
                     double complementarity, int iterations)
      : std::runtime_error(what), best_(std::move(best)), stationarity_(stationarity),
        complementarity_(complementarity), iterations_(iterations) {}

  const VertexFunction& best() const { return best_; }
  double stationarity() const { return stationarity_; }
  double complementarity() const { return complementarity_; }
  int iterations() const { return iterations_; }

 private:
  VertexFunction best_;
  double stationarity_;
  double complementarity_;
  int iterations_;
};

/// `hint` is a sign pattern to try before iterating, typically the pattern of
/// the previous time step.
ProxResult prox(const EnergyModel& model, const VertexFunction& v, double lambda,
                const ProxOptions& options = {}, const std::vector<std::int8_t>* hint = nullptr);

ProxResult prox(const Functional& functional, const VertexFunction& v, double lambda, double tol);

/// Plain primal-dual iterations without polishing; used by the benchmark and
/// the back end equivalence tests. Returns the primal iterate and fills dual.
VertexFunction pdhg_iterate(const EnergyModel& model, const VertexFunction& v, double lambda,
                            int iterations, kernels::Backend backend, std::vector<double>& dual);

}  // namespace rwflow
