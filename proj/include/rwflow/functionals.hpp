#pragma once

// Energy functionals of inhomogeneous growth on random walk spaces and the
// certificates witnessing membership in their subdifferentials.

#include "rwflow/kernels.hpp"
#include "rwflow/space.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rwflow {

/// Growth exponent of one structure: p = 1 is total variation.
struct GrowthSpec {
  double p = 1.0;

  static GrowthSpec tv() { return {1.0}; }
  static GrowthSpec power(double p);
  bool is_tv() const { return p == 1.0; }
};

/// Whether (p, q, finiteness) satisfy the hypotheses of the subdifferential identification.
struct ValidityFlags {
  bool finite_measure = true;
  bool exponent_range = false;  // q <= p/(p-1) <= 2 <= p
  bool theory_valid = true;
  std::vector<std::string> warnings;
};

/// F = F_{q, m1} + F_{p, m2} on one vertex set, gradient flow in L^2(nu1).
class TwoStructureProblem {
 public:
  TwoStructureProblem(RandomWalkSpace space1, RandomWalkSpace space2, GrowthSpec growth1,
                      GrowthSpec growth2);

  const RandomWalkSpace& space1() const { return space1_; }
  const RandomWalkSpace& space2() const { return space2_; }
  const GrowthSpec& growth1() const { return growth1_; }
  const GrowthSpec& growth2() const { return growth2_; }
  /// mu = d nu2 / d nu1.
  const Vec& mu() const { return mu_; }
  double mu_lower_bound() const { return mu_.minCoeff(); }
  const ValidityFlags& validity() const { return validity_; }

 private:
  RandomWalkSpace space1_;
  RandomWalkSpace space2_;
  GrowthSpec growth1_;
  GrowthSpec growth2_;
  Vec mu_;
  ValidityFlags validity_;
};

/// F = F_{A,q,m} + F_{B,p,m} with symmetric edge weights K_A, K_B in {0, 1/2, 1}.
class PartitionProblem {
 public:
  PartitionProblem(RandomWalkSpace space, EdgeField ka, EdgeField kb, GrowthSpec growth_a,
                   GrowthSpec growth_b);

  const RandomWalkSpace& space() const { return space_; }
  const EdgeField& ka() const { return ka_; }
  const EdgeField& kb() const { return kb_; }
  const GrowthSpec& growth_a() const { return growth_a_; }
  const GrowthSpec& growth_b() const { return growth_b_; }
  const ValidityFlags& validity() const { return validity_; }

 private:
  RandomWalkSpace space_;
  EdgeField ka_;
  EdgeField kb_;
  GrowthSpec growth_a_;
  GrowthSpec growth_b_;
  ValidityFlags validity_;
};

using Functional = std::variant<TwoStructureProblem, PartitionProblem>;

/// Per-vertex neighbour subsets A_x, B_x of supp(m_x).
using VertexSets = std::vector<std::vector<int>>;

/// Builds K_A, K_B and checks A_x u B_x covers supp(m_x).
PartitionProblem build_partition_kernels(const RandomWalkSpace& space, const VertexSets& a,
                                         const VertexSets& b, GrowthSpec growth_a = GrowthSpec::tv(),
                                         GrowthSpec growth_b = GrowthSpec::power(2.0));

/// A functional flattened to a list of weighted edge terms
///   F(u) = sum_k W_k |u(head_k) - u(tail_k)|^{p_k} / p_k
/// with the gradient flow taken in L^2(metric).
class EnergyModel {
 public:
  EnergyModel(Vec metric, std::vector<GrowthSpec> structures, std::vector<EnergyTerm> terms);

  int size() const { return static_cast<int>(metric_.size()); }
  const Vec& metric() const { return metric_; }
  std::span<const EnergyTerm> terms() const { return terms_; }
  int term_count() const { return static_cast<int>(terms_.size()); }
  std::span<const GrowthSpec> structures() const { return structures_; }
  const kernels::Incidence& incidence() const { return incidence_; }
  bool has_tv() const;

  /// The same terms restricted to one structure.
  EnergyModel restricted(int structure) const;

 private:
  Vec metric_;
  std::vector<GrowthSpec> structures_;
  std::vector<EnergyTerm> terms_;
  kernels::Incidence incidence_;
};

EnergyModel compile(const Functional& functional);
EnergyModel compile(const TwoStructureProblem& problem);
EnergyModel compile(const PartitionProblem& problem);

/// Space whose measure is the flow metric (nu1 or nu).
const RandomWalkSpace& primary_space(const Functional& functional);
const ValidityFlags& validity(const Functional& functional);

double eval_energy(const EnergyModel& model, const VertexFunction& u,
                   kernels::Backend backend = kernels::Backend::Serial);
double eval_energy(const Functional& functional, const VertexFunction& u);

/// Per-vertex (1/metric) * sum_k sign W_k z_k; the velocity produced by the
/// dual values z (TV selections or p-fluxes). Equals -v for v in dF(u).
VertexFunction flux_divergence(const EnergyModel& model, std::span<const double> z,
                               kernels::Backend backend = kernels::Backend::Serial);

/// (Delta_p u)(x) = sum_y |grad u|^{p-2} grad u (x,y) M(x,y).
VertexFunction p_laplacian(const RandomWalkSpace& space, const VertexFunction& u, double p);
/// Weighted variant sum_y K(x,y) |grad u|^{p-2} grad u (x,y) M(x,y).
VertexFunction p_laplacian(const RandomWalkSpace& space, const VertexFunction& u, double p,
                           const EdgeField& k);

/// Dual values witnessing v in dF(u), one per energy term.
struct SubgradientCertificate {
  std::vector<double> dual;     // g for TV terms, |d|^{p-2} d for power terms
  double stationarity = 0.0;    // || v - (-flux_divergence) ||_{L^2(metric)}
  double complementarity = 0.0; // max over TV terms of |g d - |d||, power terms |z - flux(d)|
  double dual_feasibility = 0.0; // max over TV terms of (|g| - 1)^+

  /// Dual values of one structure as an antisymmetric field on `space`.
  EdgeField structure_field(const EnergyModel& model, const RandomWalkSpace& space,
                            int structure) const;
};

/// Evaluates the residuals of a candidate certificate for (u, v).
SubgradientCertificate certify(const EnergyModel& model, const VertexFunction& u,
                               const VertexFunction& v, std::vector<double> dual);

struct TvCertificateReport {
  double bound = 0.0;            // max (|g| - 1)^+
  double divergence = 0.0;       // max_x |v(x) + sum_y g K M|
  double complementarity = 0.0;  // max over K > 0, grad u != 0 of |g grad u - |grad u||
  bool valid(double tol) const { return bound <= tol && divergence <= tol && complementarity <= tol; }
};

TvCertificateReport tv_certificate_check(const RandomWalkSpace& space, const VertexFunction& u,
                                         const VertexFunction& v, const EdgeField& g,
                                         const EdgeField* k = nullptr);

}  // namespace rwflow
