#pragma once

// Poincare constants lambda = inf F(u) / |u - mean|^k over nonconstant u,
// with k the homogeneity of the functional in the (q,2) mode and 1 otherwise.

#include "rwflow/functionals.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rwflow {

enum class PoincareMode { L1, L2, Q2 };

PoincareMode parse_poincare_mode(const std::string& name);

struct PoincareEstimate {
  double lambda = 0.0;      // certified value when available, else best heuristic value
  double heuristic = 0.0;   // best value from the multi-start search
  bool certified = false;
  PoincareMode mode = PoincareMode::L2;
  double q = 1.0;
  VertexFunction witness;   // zero mean, unit norm
  std::string method;
  int restarts = 0;
  int iterations = 0;
};

/// F(w) with w = (u - mean) / |u - mean|_{L^r}; r = 1 for L1, 2 otherwise.
/// In Q2 mode the norm is raised to q. Returns +inf for constant u.
double poincare_ratio(const EnergyModel& model, const VertexFunction& u, PoincareMode mode,
                      double q = 1.0);

/// Exact value for pure total variation models with at most `max_exact` vertices
/// (two-level functions for L2, three-level functions for L1) and for purely
/// quadratic models in Q2 mode with q = 2 (half the Fiedler value of metric^-1 L).
bool certified_lambda(const EnergyModel& model, PoincareMode mode, double q, PoincareEstimate& out,
                      int max_exact = 12);

PoincareEstimate estimate_lambda(const EnergyModel& model, PoincareMode mode, double q = 1.0,
                                 std::uint64_t seed = 1, int restarts = 16);

struct PoincareReport {
  bool passed = true;
  double lambda = 0.0;
  double worst_ratio = 0.0;
  VertexFunction worst;
  int samples = 0;
};

/// Checks lambda |u - mean|^k <= F(u) on random samples and on every
/// two- and three-level witness when the vertex count allows.
PoincareReport verify_poincare(const EnergyModel& model, double lambda, PoincareMode mode,
                               int samples, double q = 1.0, std::uint64_t seed = 1);

}  // namespace rwflow
