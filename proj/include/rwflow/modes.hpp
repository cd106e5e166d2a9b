#pragma once

// Sign patterns on total variation terms and the cluster structure they induce.
//
// A total variation term with sigma = 0 is "free": its endpoints are forced to
// share a value and its dual value g is an unknown in [-1, 1]. Terms with
// sigma = +-1 contribute the constant g = sigma. Power terms always carry their
// explicit flux.

#include "rwflow/functionals.hpp"

#include <cstdint>
#include <vector>

namespace rwflow {

class ModeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClusterStructure {
  std::vector<std::int8_t> sigma;              // per term, ignored on power terms
  std::vector<int> cluster;                    // per vertex
  std::vector<std::vector<int>> members;       // per cluster, ascending
  std::vector<std::vector<int>> internal;      // per cluster, free TV terms inside
  Vec weight;                                  // per cluster, sum of metric

  int cluster_count() const { return static_cast<int>(members.size()); }
  bool cyclic(int c) const {
    return static_cast<int>(internal[c].size()) >= static_cast<int>(members[c].size());
  }
};

/// Clusters are the connected components of free TV terms.
ClusterStructure make_structure(const EnergyModel& model, std::vector<std::int8_t> sigma);

/// Initial sign pattern: sigma = sign(d) on TV terms with |d| > zero_tol, 0 otherwise.
std::vector<std::int8_t> sign_pattern(const EnergyModel& model, const VertexFunction& u,
                                      double zero_tol);

/// Metric-weighted cluster averages.
Vec cluster_values(const ClusterStructure& s, const EnergyModel& model, const VertexFunction& u);
VertexFunction expand(const ClusterStructure& s, const Vec& c);

/// Per-vertex flux sum over every term except the free ones:
/// sigma-terms contribute sign * W * sigma, power terms sign * W * |d|^(p-2) d.
VertexFunction external_flux(const EnergyModel& model, const ClusterStructure& s,
                             const VertexFunction& u);

/// Smooth ODE on cluster values, weight_C c_C' = sum_{x in C} external_flux(x).
class ReducedSystem {
 public:
  ReducedSystem(const EnergyModel& model, ClusterStructure structure);

  const ClusterStructure& structure() const { return structure_; }
  int dimension() const { return structure_.cluster_count(); }
  Vec rhs(const Vec& c) const;
  /// True when every power term is quadratic, so that c' = A c + b.
  bool affine() const { return affine_; }
  const Mat& a() const { return a_; }
  const Vec& b() const { return b_; }

 private:
  const EnergyModel* model_;
  ClusterStructure structure_;
  bool affine_ = false;
  Mat a_;
  Vec b_;
};

/// Dual values on free terms that make every vertex of a cluster move with
/// the cluster. target(x) is the required sum over free terms at x of
/// sign * W * g. Underdetermined systems take the minimum-norm solution.
struct InternalDual {
  std::vector<double> g;          // per term, zero off the free terms
  std::vector<double> excess;     // per cluster, max |g| - 1 over its free terms
  std::vector<int> worst;         // per cluster, the free term attaining max |g| (-1 if none)
  std::vector<double> residual;   // per cluster, consistency residual of the linear system
  bool feasible(double tol) const;
};

InternalDual recover_internal_g(const EnergyModel& model, const ClusterStructure& s,
                                const VertexFunction& target, bool use_feasibility = true);

/// target(x) for the flow: metric(x) * c'_C - external_flux(x).
VertexFunction flow_target(const EnergyModel& model, const ClusterStructure& s,
                           const VertexFunction& u, const Vec& cdot);

/// Finds g with |g| <= 1 and B g = r by alternating projections (Dykstra).
/// On success g holds a point of the intersection.
bool box_affine_feasible(const Mat& b, const Vec& r, Vec& g, double tol, int max_iter = 20000);

/// Sign pattern of the flow at u: minimum-norm velocity selection over the
/// free terms of `sigma`, then verified and refined until every cluster has a
/// feasible internal dual.
std::vector<std::int8_t> select_mode(const EnergyModel& model, const VertexFunction& u,
                                     std::vector<std::int8_t> sigma);

}  // namespace rwflow
