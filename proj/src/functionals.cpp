#include "rwflow/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rwflow {

GrowthSpec GrowthSpec::power(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) {
    throw std::invalid_argument("growth exponent must be >= 1, got " + std::to_string(p));
  }
  return {p};
}

namespace {

void check_growth(const GrowthSpec& g) {
  if (!(g.p >= 1.0) || !std::isfinite(g.p)) {
    throw std::invalid_argument("growth exponent must be >= 1");
  }
}

// Exponent window q <= p/(p-1) <= 2 <= p; the (1,p) and (1,1) cases need no window.
bool in_exponent_range(double q, double p) {
  if (p <= 1.0) return false;
  const double conj = p / (p - 1.0);
  return q <= conj && conj <= 2.0 && 2.0 <= p;
}

}  // namespace

TwoStructureProblem::TwoStructureProblem(RandomWalkSpace space1, RandomWalkSpace space2,
                                         GrowthSpec growth1, GrowthSpec growth2)
    : space1_(std::move(space1)), space2_(std::move(space2)), growth1_(growth1), growth2_(growth2) {
  check_growth(growth1_);
  check_growth(growth2_);
  if (space1_.size() != space2_.size()) {
    throw SpaceError("both structures must live on the same vertex set");
  }
  mu_ = space2_.measure().cwiseQuotient(space1_.measure());
  const double q = growth1_.p;
  const double p = growth2_.p;
  validity_.finite_measure = true;
  validity_.exponent_range = in_exponent_range(q, p);
  if (q > 2.0) {
    validity_.theory_valid = false;
    validity_.warnings.push_back("first growth exponent exceeds 2; the sum rule for the "
                                 "subdifferential is not covered");
  }
  if (!growth1_.is_tv() && p < q) {
    validity_.warnings.push_back("second exponent is smaller than the first");
  }
}

PartitionProblem::PartitionProblem(RandomWalkSpace space, EdgeField ka, EdgeField kb,
                                   GrowthSpec growth_a, GrowthSpec growth_b)
    : space_(std::move(space)), ka_(std::move(ka)), kb_(std::move(kb)), growth_a_(growth_a),
      growth_b_(growth_b) {
  check_growth(growth_a_);
  check_growth(growth_b_);
  const auto m = static_cast<std::size_t>(space_.edge_count());
  if (ka_.size() != m || kb_.size() != m) throw SpaceError("partition weights must cover the support");
  for (std::size_t e = 0; e < m; ++e) {
    for (double k : {ka_[e], kb_[e]}) {
      if (k != 0.0 && k != 0.5 && k != 1.0) throw SpaceError("partition weights must be 0, 1/2 or 1");
    }
    if (ka_[e] + kb_[e] < 1.0) {
      const auto& ed = space_.edges()[e];
      throw SpaceError("pair (" + std::to_string(ed.tail) + "," + std::to_string(ed.head) +
                       ") is covered by neither A nor B");
    }
  }
  validity_.finite_measure = true;
  validity_.exponent_range = in_exponent_range(growth_a_.p, growth_b_.p);
  if (!growth_a_.is_tv()) {
    validity_.warnings.push_back("partition characterisation assumes total variation on A");
  }
}

PartitionProblem build_partition_kernels(const RandomWalkSpace& space, const VertexSets& a,
                                         const VertexSets& b, GrowthSpec growth_a,
                                         GrowthSpec growth_b) {
  const int n = space.size();
  if (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != n) {
    throw SpaceError("A and B need one neighbour set per vertex");
  }
  const auto mark = [&](const VertexSets& sets, const char* name) {
    std::vector<std::vector<char>> in(n, std::vector<char>(n, 0));
    for (int x = 0; x < n; ++x) {
      for (int y : sets[x]) {
        if (y < 0 || y >= n || x == y || space.kernel(x, y) <= 0.0) {
          std::ostringstream msg;
          msg << name << "_" << x << " contains " << y << ", which is not in supp(m_" << x << ")";
          throw SpaceError(msg.str());
        }
        in[x][y] = 1;
      }
    }
    return in;
  };
  const auto in_a = mark(a, "A");
  const auto in_b = mark(b, "B");
  EdgeField ka(space);
  EdgeField kb(space);
  const auto edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int x = edges[e].tail;
    const int y = edges[e].head;
    for (auto [from, to] : {std::pair{x, y}, std::pair{y, x}}) {
      if (!in_a[from][to] && !in_b[from][to]) {
        std::ostringstream msg;
        msg << "coverage violated at (" << from << "," << to << "): neither A_" << from << " nor B_"
            << from << " contains " << to;
        throw SpaceError(msg.str());
      }
    }
    ka[e] = 0.5 * (in_a[x][y] + in_a[y][x]);
    kb[e] = 0.5 * (in_b[x][y] + in_b[y][x]);
  }
  return PartitionProblem(space, std::move(ka), std::move(kb), growth_a, growth_b);
}

EnergyModel::EnergyModel(Vec metric, std::vector<GrowthSpec> structures, std::vector<EnergyTerm> terms)
    : metric_(std::move(metric)), structures_(std::move(structures)), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (t.tail < 0 || t.head < 0 || t.tail >= size() || t.head >= size() || t.tail == t.head) {
      throw std::invalid_argument("energy term endpoints out of range");
    }
    if (!(t.weight > 0.0)) throw std::invalid_argument("energy term weights must be positive");
  }
  incidence_ = kernels::Incidence::build(size(), terms_);
}

bool EnergyModel::has_tv() const {
  return std::any_of(terms_.begin(), terms_.end(), [](const EnergyTerm& t) { return t.p == 1.0; });
}

EnergyModel EnergyModel::restricted(int structure) const {
  std::vector<EnergyTerm> kept;
  for (const auto& t : terms_) {
    if (t.structure == structure) kept.push_back(t);
  }
  return EnergyModel(metric_, structures_, std::move(kept));
}

EnergyModel compile(const TwoStructureProblem& problem) {
  std::vector<EnergyTerm> terms;
  int s = 0;
  for (const auto* space : {&problem.space1(), &problem.space2()}) {
    const double p = s == 0 ? problem.growth1().p : problem.growth2().p;
    for (const auto& e : space->edges()) terms.push_back({e.tail, e.head, e.weight, p, s});
    ++s;
  }
  return EnergyModel(problem.space1().measure(), {problem.growth1(), problem.growth2()},
                     std::move(terms));
}

EnergyModel compile(const PartitionProblem& problem) {
  std::vector<EnergyTerm> terms;
  const auto edges = problem.space().edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (problem.ka()[e] > 0.0) {
      terms.push_back({edges[e].tail, edges[e].head, edges[e].weight * problem.ka()[e],
                       problem.growth_a().p, 0});
    }
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (problem.kb()[e] > 0.0) {
      terms.push_back({edges[e].tail, edges[e].head, edges[e].weight * problem.kb()[e],
                       problem.growth_b().p, 1});
    }
  }
  return EnergyModel(problem.space().measure(), {problem.growth_a(), problem.growth_b()},
                     std::move(terms));
}

EnergyModel compile(const Functional& functional) {
  return std::visit([](const auto& p) { return compile(p); }, functional);
}

const RandomWalkSpace& primary_space(const Functional& functional) {
  if (const auto* two = std::get_if<TwoStructureProblem>(&functional)) return two->space1();
  return std::get<PartitionProblem>(functional).space();
}

const ValidityFlags& validity(const Functional& functional) {
  return std::visit([](const auto& p) -> const ValidityFlags& { return p.validity(); }, functional);
}

double eval_energy(const EnergyModel& model, const VertexFunction& u, kernels::Backend backend) {
  std::vector<double> e(model.term_count());
  std::span<const double> us(u.data(), u.size());
  if (backend == kernels::Backend::OpenMP) {
    kernels::omp::term_energies(model.terms(), us, e);
  } else {
    kernels::serial::term_energies(model.terms(), us, e);
  }
  double total = 0.0;
  for (double x : e) total += x;
  return total;
}

double eval_energy(const Functional& functional, const VertexFunction& u) {
  return eval_energy(compile(functional), u);
}

VertexFunction flux_divergence(const EnergyModel& model, std::span<const double> z,
                               kernels::Backend backend) {
  VertexFunction out(model.size());
  std::span<double> os(out.data(), out.size());
  if (backend == kernels::Backend::OpenMP) {
    kernels::omp::flux_sum(model.terms(), model.incidence(), z, os);
  } else {
    kernels::serial::flux_sum(model.terms(), model.incidence(), z, os);
  }
  return out.cwiseQuotient(model.metric());
}

VertexFunction p_laplacian(const RandomWalkSpace& space, const VertexFunction& u, double p) {
  EdgeField ones(std::vector<double>(space.edge_count(), 1.0));
  return p_laplacian(space, u, p, ones);
}

VertexFunction p_laplacian(const RandomWalkSpace& space, const VertexFunction& u, double p,
                           const EdgeField& k) {
  if (!(p > 1.0)) {
    throw std::invalid_argument("p-Laplacian needs p > 1; total variation is set-valued");
  }
  if (u.size() != space.size()) throw SpaceError("function length does not match space");
  VertexFunction out = VertexFunction::Zero(space.size());
  const auto edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& ed = edges[e];
    const double flux = k[e] * kernels::growth_flux(u(ed.head) - u(ed.tail), p);
    out(ed.tail) += flux * space.kernel(ed.tail, ed.head);
    out(ed.head) -= flux * space.kernel(ed.head, ed.tail);
  }
  return out;
}

EdgeField SubgradientCertificate::structure_field(const EnergyModel& model,
                                                  const RandomWalkSpace& space, int structure) const {
  EdgeField field(space);
  const auto terms = model.terms();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k].structure != structure) continue;
    field.set(space, terms[k].tail, terms[k].head, dual[k]);
  }
  return field;
}

SubgradientCertificate certify(const EnergyModel& model, const VertexFunction& u,
                               const VertexFunction& v, std::vector<double> dual) {
  SubgradientCertificate cert;
  cert.dual = std::move(dual);
  const VertexFunction div = flux_divergence(model, cert.dual);
  cert.stationarity = norm_l2(model.metric(), v + div);
  const auto terms = model.terms();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double d = u(terms[k].head) - u(terms[k].tail);
    const double z = cert.dual[k];
    if (terms[k].p == 1.0) {
      cert.dual_feasibility = std::max(cert.dual_feasibility, std::abs(z) - 1.0);
      cert.complementarity = std::max(cert.complementarity, std::abs(z * d - std::abs(d)));
    } else {
      cert.complementarity =
          std::max(cert.complementarity, std::abs(z - kernels::growth_flux(d, terms[k].p)));
    }
  }
  return cert;
}

TvCertificateReport tv_certificate_check(const RandomWalkSpace& space, const VertexFunction& u,
                                         const VertexFunction& v, const EdgeField& g,
                                         const EdgeField* k) {
  TvCertificateReport r;
  const auto edges = space.edges();
  VertexFunction acc = v;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& ed = edges[e];
    const double weight = k ? (*k)[e] : 1.0;
    r.bound = std::max(r.bound, std::abs(g[e]) - 1.0);
    acc(ed.tail) += g[e] * weight * space.kernel(ed.tail, ed.head);
    acc(ed.head) -= g[e] * weight * space.kernel(ed.head, ed.tail);
    if (weight > 0.0) {
      const double d = u(ed.head) - u(ed.tail);
      if (d != 0.0) r.complementarity = std::max(r.complementarity, std::abs(g[e] * d - std::abs(d)));
    }
  }
  r.divergence = norm_linf(acc);
  return r;
}

}  // namespace rwflow
