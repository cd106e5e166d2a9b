#include "rwflow/poincare.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace rwflow {

PoincareMode parse_poincare_mode(const std::string& name) {
  if (name == "1" || name == "L1" || name == "l1") return PoincareMode::L1;
  if (name == "2" || name == "L2" || name == "l2") return PoincareMode::L2;
  if (name == "q2" || name == "Q2" || name == "(q,2)") return PoincareMode::Q2;
  throw std::invalid_argument("unknown Poincare mode '" + name + "'");
}

namespace {

double deviation_norm(const Vec& metric, const VertexFunction& dev, PoincareMode mode) {
  return mode == PoincareMode::L1 ? norm_l1(metric, dev) : norm_l2(metric, dev);
}

VertexFunction normalise(const Vec& metric, const VertexFunction& u, PoincareMode mode) {
  const VertexFunction dev = u.array() - mean(metric, u);
  const double n = deviation_norm(metric, dev, mode);
  if (!(n > 0.0)) return VertexFunction();
  return dev / n;
}

bool lex_less(const VertexFunction& a, const VertexFunction& b) {
  for (Eigen::Index i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a(i) != b(i)) return a(i) < b(i);
  }
  return a.size() < b.size();
}

bool pure_tv(const EnergyModel& model) {
  return std::all_of(model.terms().begin(), model.terms().end(),
                     [](const EnergyTerm& t) { return t.p == 1.0; });
}

bool pure_quadratic(const EnergyModel& model) {
  return std::all_of(model.terms().begin(), model.terms().end(),
                     [](const EnergyTerm& t) { return t.p == 2.0; });
}

// On the unit sphere the ratio is F itself, whatever the homogeneity.
void consider(const EnergyModel& model, const VertexFunction& u, PoincareMode mode, double& best,
              VertexFunction& witness) {
  const VertexFunction w = normalise(model.metric(), u, mode);
  if (w.size() == 0) return;
  const double r = eval_energy(model, w);
  if (r < best - 1e-15 || (std::abs(r - best) <= 1e-15 && lex_less(w, witness))) {
    best = r;
    witness = w;
  }
}

}  // namespace

double poincare_ratio(const EnergyModel& model, const VertexFunction& u, PoincareMode mode,
                      double q) {
  const VertexFunction dev = u.array() - mean(model.metric(), u);
  const double n = deviation_norm(model.metric(), dev, mode);
  if (!(n > 0.0)) return std::numeric_limits<double>::infinity();
  if (mode == PoincareMode::Q2) return eval_energy(model, u) / std::pow(n, q);
  return eval_energy(model, u) / n;
}

bool certified_lambda(const EnergyModel& model, PoincareMode mode, double q, PoincareEstimate& out,
                      int max_exact) {
  const int n = model.size();
  out.mode = mode;
  out.q = q;
  if (mode == PoincareMode::Q2 && q == 2.0 && pure_quadratic(model)) {
    Mat lap = Mat::Zero(n, n);
    for (const auto& t : model.terms()) {
      lap(t.tail, t.tail) += t.weight;
      lap(t.head, t.head) += t.weight;
      lap(t.tail, t.head) -= t.weight;
      lap(t.head, t.tail) -= t.weight;
    }
    const Mat metric = model.metric().asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(lap, metric);
    // The smallest eigenvalue belongs to the constants.
    out.lambda = n > 1 ? 0.5 * std::max(0.0, es.eigenvalues()(1)) : 0.0;
    out.witness = n > 1 ? normalise(model.metric(), es.eigenvectors().col(1), PoincareMode::L2)
                        : VertexFunction::Zero(n);
    out.certified = true;
    out.method = "generalized eigenvalue";
    return true;
  }
  if (mode == PoincareMode::Q2 && q != 1.0) return false;
  if (!pure_tv(model) || n > max_exact || n < 2) return false;
  double best = std::numeric_limits<double>::infinity();
  VertexFunction witness;
  if (mode != PoincareMode::L1) {
    // Minimisers of a 1-homogeneous piecewise linear ratio over the L2 sphere
    // sit on extreme rays of the ordering cones: two-level functions.
    for (std::uint32_t s = 1; s + 1 < (1u << n); ++s) {
      VertexFunction u(n);
      for (int x = 0; x < n; ++x) u(x) = (s >> x) & 1u ? 1.0 : 0.0;
      consider(model, u, mode, best, witness);
    }
  } else {
    // With the L1 norm the sign pattern refines the cones: three-level
    // functions beta on A, 0, -alpha on B with zero mean.
    std::vector<int> digit(n, 0);
    const auto total = static_cast<std::uint64_t>(std::pow(3.0, n));
    for (std::uint64_t code = 1; code < total; ++code) {
      std::uint64_t c = code;
      double ma = 0.0;
      double mb = 0.0;
      for (int x = 0; x < n; ++x) {
        digit[x] = static_cast<int>(c % 3);
        c /= 3;
        if (digit[x] == 1) ma += model.metric()(x);
        if (digit[x] == 2) mb += model.metric()(x);
      }
      if (ma == 0.0 || mb == 0.0) continue;
      VertexFunction u(n);
      for (int x = 0; x < n; ++x) u(x) = digit[x] == 1 ? 1.0 / ma : (digit[x] == 2 ? -1.0 / mb : 0.0);
      consider(model, u, mode, best, witness);
    }
  }
  out.lambda = best;
  out.witness = witness;
  out.certified = true;
  out.method = mode == PoincareMode::L1 ? "three-level enumeration" : "two-level enumeration";
  return true;
}

PoincareEstimate estimate_lambda(const EnergyModel& model, PoincareMode mode, double q,
                                 std::uint64_t seed, int restarts) {
  const int n = model.size();
  PoincareEstimate est;
  est.mode = mode;
  est.q = q;
  est.restarts = restarts;
  if (n < 2) {
    est.certified = true;
    est.method = "trivial";
    return est;
  }
  const auto ratio = [&](const VertexFunction& u) { return poincare_ratio(model, u, mode, q); };
  std::vector<double> best_val(restarts, std::numeric_limits<double>::infinity());
  std::vector<VertexFunction> best_u(restarts);
  std::vector<int> iters(restarts, 0);
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(r));
    std::normal_distribution<double> gauss;
    VertexFunction u(n);
    for (int x = 0; x < n; ++x) u(x) = gauss(rng);
    u = normalise(model.metric(), u, mode);
    if (u.size() == 0) continue;
    double f = ratio(u);
    double step = 0.5;
    int it = 0;
    // Compass search over coordinate directions; the ratio is scale and shift invariant.
    while (step > 1e-12 && it < 20000) {
      bool improved = false;
      for (int x = 0; x < n && !improved; ++x) {
        for (double dir : {1.0, -1.0}) {
          VertexFunction trial = u;
          trial(x) += dir * step;
          const double ft = ratio(trial);
          if (ft < f - 1e-15) {
            u = normalise(model.metric(), trial, mode);
            f = ft;
            improved = true;
            break;
          }
        }
        ++it;
      }
      if (!improved) step *= 0.5;
    }
    best_val[r] = f;
    best_u[r] = u;
    iters[r] = it;
  }
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    est.iterations += iters[r];
    if (best_u[r].size() == 0) continue;
    if (best_val[r] < best || (best_val[r] == best && lex_less(best_u[r], est.witness))) {
      best = best_val[r];
      est.witness = best_u[r];
    }
  }
  est.heuristic = best;
  est.lambda = best;
  est.method = "multi-start compass search";
  PoincareEstimate cert;
  if (certified_lambda(model, mode, q, cert)) {
    est.lambda = cert.lambda;
    est.witness = cert.witness;
    est.certified = true;
    est.method = cert.method;
  }
  return est;
}

PoincareReport verify_poincare(const EnergyModel& model, double lambda, PoincareMode mode,
                               int samples, double q, std::uint64_t seed) {
  PoincareReport rep;
  rep.lambda = lambda;
  rep.worst_ratio = std::numeric_limits<double>::infinity();
  const int n = model.size();
  const auto check = [&](const VertexFunction& u) {
    const double r = poincare_ratio(model, u, mode, q);
    ++rep.samples;
    if (r < rep.worst_ratio) {
      rep.worst_ratio = r;
      rep.worst = u;
    }
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int s = 0; s < samples; ++s) {
    VertexFunction u(n);
    for (int x = 0; x < n; ++x) u(x) = unif(rng);
    check(u);
  }
  if (n <= 12) {
    for (std::uint32_t s = 1; s + 1 < (1u << n); ++s) {
      VertexFunction u(n);
      for (int x = 0; x < n; ++x) u(x) = (s >> x) & 1u ? 1.0 : 0.0;
      check(u);
    }
  }
  if (n <= 8) {
    const auto total = static_cast<std::uint64_t>(std::pow(3.0, n));
    for (std::uint64_t code = 1; code < total; ++code) {
      std::uint64_t c = code;
      VertexFunction u(n);
      for (int x = 0; x < n; ++x) {
        const int d = static_cast<int>(c % 3);
        c /= 3;
        u(x) = d == 1 ? 1.0 : (d == 2 ? -1.0 : 0.0);
      }
      check(u);
    }
  }
  rep.passed = rep.worst_ratio >= lambda * (1.0 - 1e-12) - 1e-15;
  return rep;
}

}  // namespace rwflow
