#include "rwflow/modes.hpp"

#include "rwflow/log.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rwflow {

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

bool is_tv(const EnergyTerm& t) { return t.p == 1.0; }

}  // namespace

ClusterStructure make_structure(const EnergyModel& model, std::vector<std::int8_t> sigma) {
  const auto terms = model.terms();
  if (sigma.size() != terms.size()) throw ModeError("sign pattern has the wrong length");
  const int n = model.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (!is_tv(terms[k]) || sigma[k] != 0) continue;
    const int a = find_root(parent, terms[k].tail);
    const int b = find_root(parent, terms[k].head);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  ClusterStructure s;
  s.sigma = std::move(sigma);
  s.cluster.assign(n, -1);
  std::vector<int> label(n, -1);
  for (int x = 0; x < n; ++x) {
    const int r = find_root(parent, x);
    if (label[r] < 0) {
      label[r] = static_cast<int>(s.members.size());
      s.members.emplace_back();
    }
    s.cluster[x] = label[r];
    s.members[label[r]].push_back(x);
  }
  s.internal.assign(s.members.size(), {});
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (is_tv(terms[k]) && s.sigma[k] == 0) {
      s.internal[s.cluster[terms[k].tail]].push_back(static_cast<int>(k));
    }
    if (!is_tv(terms[k])) s.sigma[k] = 0;
  }
  s.weight = Vec::Zero(s.cluster_count());
  for (int x = 0; x < n; ++x) s.weight(s.cluster[x]) += model.metric()(x);
  return s;
}

std::vector<std::int8_t> sign_pattern(const EnergyModel& model, const VertexFunction& u,
                                      double zero_tol) {
  const auto terms = model.terms();
  std::vector<std::int8_t> sigma(terms.size(), 0);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (!is_tv(terms[k])) continue;
    const double d = u(terms[k].head) - u(terms[k].tail);
    if (d > zero_tol) sigma[k] = 1;
    else if (d < -zero_tol) sigma[k] = -1;
  }
  return sigma;
}

Vec cluster_values(const ClusterStructure& s, const EnergyModel& model, const VertexFunction& u) {
  Vec c = Vec::Zero(s.cluster_count());
  for (int x = 0; x < model.size(); ++x) c(s.cluster[x]) += model.metric()(x) * u(x);
  return c.cwiseQuotient(s.weight);
}

VertexFunction expand(const ClusterStructure& s, const Vec& c) {
  VertexFunction u(s.cluster.size());
  for (std::size_t x = 0; x < s.cluster.size(); ++x) u(x) = c(s.cluster[x]);
  return u;
}

VertexFunction external_flux(const EnergyModel& model, const ClusterStructure& s,
                             const VertexFunction& u) {
  VertexFunction out = VertexFunction::Zero(model.size());
  const auto terms = model.terms();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& t = terms[k];
    double z;
    if (is_tv(t)) {
      if (s.sigma[k] == 0) continue;
      z = s.sigma[k];
    } else {
      z = kernels::growth_flux(u(t.head) - u(t.tail), t.p);
    }
    out(t.tail) += t.weight * z;
    out(t.head) -= t.weight * z;
  }
  return out;
}

ReducedSystem::ReducedSystem(const EnergyModel& model, ClusterStructure structure)
    : model_(&model), structure_(std::move(structure)) {
  affine_ = std::all_of(model.terms().begin(), model.terms().end(),
                        [](const EnergyTerm& t) { return t.p == 1.0 || t.p == 2.0; });
  if (affine_) {
    const int m = dimension();
    b_ = rhs(Vec::Zero(m));
    a_.resize(m, m);
    for (int j = 0; j < m; ++j) a_.col(j) = rhs(Vec::Unit(m, j)) - b_;
  }
}

Vec ReducedSystem::rhs(const Vec& c) const {
  const VertexFunction e = external_flux(*model_, structure_, expand(structure_, c));
  Vec out = Vec::Zero(dimension());
  for (int x = 0; x < model_->size(); ++x) out(structure_.cluster[x]) += e(x);
  return out.cwiseQuotient(structure_.weight);
}

VertexFunction flow_target(const EnergyModel& model, const ClusterStructure& s,
                           const VertexFunction& u, const Vec& cdot) {
  const VertexFunction e = external_flux(model, s, u);
  VertexFunction target(model.size());
  for (int x = 0; x < model.size(); ++x) target(x) = model.metric()(x) * cdot(s.cluster[x]) - e(x);
  return target;
}

bool InternalDual::feasible(double tol) const {
  for (std::size_t c = 0; c < excess.size(); ++c) {
    if (excess[c] > tol || residual[c] > 1e-9) return false;
  }
  return true;
}

bool box_affine_feasible(const Mat& b, const Vec& r, Vec& g, double tol, int max_iter) {
  if (g.size() != b.cols()) g = Vec::Zero(b.cols());
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(b);
  const auto project_affine = [&](const Vec& x) -> Vec { return x - cod.solve(b * x - r); };
  Vec x = project_affine(g.cwiseMax(-1.0).cwiseMin(1.0));
  Vec p = Vec::Zero(x.size());
  Vec q = Vec::Zero(x.size());
  for (int it = 0; it < max_iter; ++it) {
    if (x.size() == 0 || x.cwiseAbs().maxCoeff() <= 1.0 + tol) {
      g = x;
      return true;
    }
    const Vec y = (x + p).cwiseMax(-1.0).cwiseMin(1.0);
    p = x + p - y;
    const Vec next = project_affine(y + q);
    q = y + q - next;
    const double move = (next - x).cwiseAbs().maxCoeff();
    x = next;
    if (move < 1e-15 && it > 100) break;
  }
  if (x.cwiseAbs().maxCoeff() <= 1.0 + tol) {
    g = x;
    return true;
  }
  return false;
}

InternalDual recover_internal_g(const EnergyModel& model, const ClusterStructure& s,
                                const VertexFunction& target, bool use_feasibility) {
  const auto terms = model.terms();
  InternalDual out;
  out.g.assign(terms.size(), 0.0);
  const int nc = s.cluster_count();
  out.excess.assign(nc, -1.0);
  out.worst.assign(nc, -1);
  out.residual.assign(nc, 0.0);
  std::vector<int> local(model.size(), -1);
  for (int c = 0; c < nc; ++c) {
    const auto& mem = s.members[c];
    const auto& in = s.internal[c];
    if (in.empty()) {
      out.residual[c] = std::abs(target(mem[0])) / (1.0 + std::abs(target(mem[0])));
      continue;
    }
    for (std::size_t i = 0; i < mem.size(); ++i) local[mem[i]] = static_cast<int>(i);
    Mat b = Mat::Zero(static_cast<Eigen::Index>(mem.size()), static_cast<Eigen::Index>(in.size()));
    Vec r(static_cast<Eigen::Index>(mem.size()));
    for (std::size_t i = 0; i < mem.size(); ++i) r(i) = target(mem[i]);
    for (std::size_t j = 0; j < in.size(); ++j) {
      const auto& t = terms[in[j]];
      b(local[t.tail], j) += t.weight;
      b(local[t.head], j) -= t.weight;
    }
    Vec g = b.completeOrthogonalDecomposition().solve(r);
    const double scale = 1.0 + r.cwiseAbs().maxCoeff();
    if (use_feasibility && s.cyclic(c) && g.cwiseAbs().maxCoeff() > 1.0 + 1e-12) {
      Vec trial = g;
      if (box_affine_feasible(b, r, trial, 1e-12)) g = trial;
    }
    out.residual[c] = (b * g - r).cwiseAbs().maxCoeff() / scale;
    Eigen::Index arg = 0;
    out.excess[c] = g.cwiseAbs().maxCoeff(&arg) - 1.0;
    out.worst[c] = in[arg];
    for (std::size_t j = 0; j < in.size(); ++j) out.g[in[j]] = g(j);
  }
  return out;
}

namespace {

// min 1/2 sum_x (e_x + (B g)_x)^2 / nu_x over g in [-1, 1]^F by FISTA.
Vec min_norm_velocity(const EnergyModel& model, const std::vector<int>& free_terms,
                      const VertexFunction& e) {
  const auto terms = model.terms();
  const int n = model.size();
  const int f = static_cast<int>(free_terms.size());
  Mat b = Mat::Zero(n, f);
  for (int j = 0; j < f; ++j) {
    const auto& t = terms[free_terms[j]];
    b(t.tail, j) += t.weight;
    b(t.head, j) -= t.weight;
  }
  const Vec inv = model.metric().cwiseInverse();
  const Mat h = b.transpose() * inv.asDiagonal() * b;
  const double l = std::max(Eigen::SelfAdjointEigenSolver<Mat>(h, Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .maxCoeff(),
                            1e-300);
  const Vec lin = b.transpose() * inv.cwiseProduct(e);
  Vec g = Vec::Zero(f);
  Vec y = g;
  double theta = 1.0;
  for (int it = 0; it < 200000; ++it) {
    const Vec grad = h * y + lin;
    const Vec next = (y - grad / l).cwiseMax(-1.0).cwiseMin(1.0);
    const double next_theta = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    Vec momentum = next + ((theta - 1.0) / next_theta) * (next - g);
    // Gradient restart keeps the iteration monotone on degenerate problems.
    if ((y - next).dot(next - g) > 0.0) {
      momentum = next;
      theta = 1.0;
    } else {
      theta = next_theta;
    }
    const double move = (next - g).cwiseAbs().maxCoeff();
    g = next;
    y = momentum;
    if (move < 1e-16 && it > 10) break;
  }
  return (e + b * g).cwiseProduct(inv);
}

bool verify_mode(const EnergyModel& model, const VertexFunction& u,
                 const std::vector<std::int8_t>& sigma, const std::vector<int>& split) {
  const ClusterStructure s = make_structure(model, sigma);
  const ReducedSystem sys(model, s);
  const Vec c = cluster_values(s, model, u);
  const Vec cdot = sys.rhs(c);
  const InternalDual dual = recover_internal_g(model, s, flow_target(model, s, u, cdot));
  if (!dual.feasible(1e-9)) return false;
  const auto terms = model.terms();
  const double scale = 1.0 + cdot.cwiseAbs().maxCoeff();
  for (int k : split) {
    const int a = s.cluster[terms[k].tail];
    const int b = s.cluster[terms[k].head];
    if (a == b) continue;
    if (sigma[k] * (cdot(b) - cdot(a)) < -1e-9 * scale) return false;
  }
  return true;
}

}  // namespace

std::vector<std::int8_t> select_mode(const EnergyModel& model, const VertexFunction& u,
                                     std::vector<std::int8_t> sigma) {
  {
    const ClusterStructure s = make_structure(model, sigma);
    bool any_free = false;
    for (const auto& in : s.internal) any_free = any_free || !in.empty();
    if (!any_free || verify_mode(model, u, sigma, {})) return sigma;
  }
  const ClusterStructure s = make_structure(model, sigma);
  std::vector<int> free_terms;
  for (const auto& in : s.internal) free_terms.insert(free_terms.end(), in.begin(), in.end());
  const VertexFunction w = min_norm_velocity(model, free_terms, external_flux(model, s, u));
  const double scale = 1.0 + w.cwiseAbs().maxCoeff();
  const auto terms = model.terms();
  for (double thresh : {1e-8, 1e-10, 1e-6, 1e-4}) {
    auto trial = sigma;
    std::vector<int> split;
    for (int k : free_terms) {
      const double dv = w(terms[k].head) - w(terms[k].tail);
      if (std::abs(dv) > thresh * scale) {
        trial[k] = dv > 0.0 ? 1 : -1;
        split.push_back(k);
      }
    }
    if (verify_mode(model, u, trial, split)) return trial;
  }
  log::debug("mode selection: velocity split failed verification, splitting greedily");
  auto trial = sigma;
  for (std::size_t guard = 0; guard <= terms.size(); ++guard) {
    const ClusterStructure st = make_structure(model, trial);
    const ReducedSystem sys(model, st);
    const Vec cdot = sys.rhs(cluster_values(st, model, u));
    const InternalDual dual = recover_internal_g(model, st, flow_target(model, st, u, cdot));
    if (dual.feasible(1e-9)) return trial;
    int worst_cluster = static_cast<int>(
        std::max_element(dual.excess.begin(), dual.excess.end()) - dual.excess.begin());
    const int k = dual.worst[worst_cluster];
    if (k < 0) break;
    trial[k] = dual.g[k] > 0.0 ? 1 : -1;
  }
  throw ModeError("no consistent sign pattern found for the current state");
}

}  // namespace rwflow
