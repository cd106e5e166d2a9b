#include "rwflow/prox.hpp"

#include "rwflow/log.hpp"
#include "rwflow/modes.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rwflow {

namespace {

struct Reduced {
  const EnergyModel& model;
  const ClusterStructure& s;
  const VertexFunction& v;
  double lambda;

  double objective(const Vec& c) const {
    const VertexFunction u = expand(s, c);
    double val = 0.0;
    for (int x = 0; x < model.size(); ++x) {
      const double d = u(x) - v(x);
      val += model.metric()(x) * d * d / (2.0 * lambda);
    }
    const auto terms = model.terms();
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const auto& t = terms[k];
      const double d = u(t.head) - u(t.tail);
      if (t.p == 1.0) {
        val += t.weight * s.sigma[k] * d;
      } else {
        val += t.weight * kernels::growth_value(d, t.p);
      }
    }
    return val;
  }

  Vec gradient(const Vec& c) const {
    const VertexFunction u = expand(s, c);
    const VertexFunction e = external_flux(model, s, u);
    Vec g = Vec::Zero(s.cluster_count());
    for (int x = 0; x < model.size(); ++x) {
      g(s.cluster[x]) += model.metric()(x) * (u(x) - v(x)) / lambda - e(x);
    }
    return g;
  }

  Mat hessian(const Vec& c) const {
    const int m = s.cluster_count();
    Mat h = Mat::Zero(m, m);
    for (int i = 0; i < m; ++i) h(i, i) = s.weight(i) / lambda;
    const double cap = 1e10 * (s.weight.maxCoeff() / lambda);
    for (const auto& t : model.terms()) {
      if (t.p == 1.0) continue;
      const int a = s.cluster[t.tail];
      const int b = s.cluster[t.head];
      if (a == b) continue;
      const double d = std::abs(c(b) - c(a));
      double curv;
      if (t.p == 2.0) {
        curv = t.weight;
      } else if (d == 0.0) {
        curv = t.p > 2.0 ? 0.0 : cap;
      } else {
        curv = std::min(cap, t.weight * (t.p - 1.0) * std::pow(d, t.p - 2.0));
      }
      h(a, a) += curv;
      h(b, b) += curv;
      h(a, b) -= curv;
      h(b, a) -= curv;
    }
    return h;
  }
};

Vec newton(const Reduced& r, Vec c) {
  double f = r.objective(c);
  for (int it = 0; it < 200; ++it) {
    const Vec g = r.gradient(c);
    const Vec step = r.hessian(c).ldlt().solve(-g);
    const double slope = g.dot(step);
    if (!(slope < 0.0)) break;
    double alpha = 1.0;
    Vec next = c + step;
    double fn = r.objective(next);
    while (fn > f + 1e-4 * alpha * slope && alpha > 1e-12) {
      alpha *= 0.5;
      next = c + alpha * step;
      fn = r.objective(next);
    }
    const double move = (next - c).cwiseAbs().maxCoeff();
    c = next;
    f = fn;
    if (move <= 1e-16 * (1.0 + c.cwiseAbs().maxCoeff())) break;
  }
  return c;
}

// Active-set solve starting from `sigma`. Returns true with `out` filled when
// the polished point carries a certificate within tolerance.
bool polish(const EnergyModel& model, const VertexFunction& v, double lambda,
            std::vector<std::int8_t> sigma, const VertexFunction& guess, double tol,
            ProxResult& out) {
  const auto terms = model.terms();
  const double scale = 1.0 + v.cwiseAbs().maxCoeff();
  const std::size_t rounds = 2 * terms.size() + 4;
  for (std::size_t round = 0; round < rounds; ++round) {
    const ClusterStructure s = make_structure(model, sigma);
    const Reduced red{model, s, v, lambda};
    const Vec c = newton(red, cluster_values(s, model, guess));
    const VertexFunction u = expand(s, c);

    bool changed = false;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      if (terms[k].p != 1.0 || sigma[k] == 0) continue;
      const int a = s.cluster[terms[k].tail];
      const int b = s.cluster[terms[k].head];
      if (a == b) continue;
      if (sigma[k] * (c(b) - c(a)) < -1e-13 * scale) {
        sigma[k] = 0;
        changed = true;
      }
    }
    if (changed) continue;

    VertexFunction target(model.size());
    const VertexFunction e = external_flux(model, s, u);
    for (int x = 0; x < model.size(); ++x) {
      target(x) = model.metric()(x) * (u(x) - v(x)) / lambda - e(x);
    }
    const InternalDual dual = recover_internal_g(model, s, target);
    for (int cl = 0; cl < s.cluster_count(); ++cl) {
      if (dual.excess[cl] > 1e-12 && dual.worst[cl] >= 0) {
        sigma[dual.worst[cl]] = dual.g[dual.worst[cl]] > 0.0 ? 1 : -1;
        changed = true;
      }
    }
    if (changed) continue;

    std::vector<double> z(terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const auto& t = terms[k];
      if (t.p != 1.0) {
        z[k] = kernels::growth_flux(u(t.head) - u(t.tail), t.p);
      } else if (s.sigma[k] != 0) {
        z[k] = s.sigma[k];
      } else {
        z[k] = std::clamp(dual.g[k], -1.0, 1.0);
      }
    }
    VertexFunction sub = (v - u) / lambda;
    SubgradientCertificate cert = certify(model, u, sub, std::move(z));
    if (cert.stationarity > tol || cert.complementarity > tol || cert.dual_feasibility > tol) {
      return false;
    }
    out.u = u;
    out.subgradient = std::move(sub);
    out.certificate = std::move(cert);
    out.pattern = std::move(sigma);
    out.polished = true;
    return true;
  }
  return false;
}

template <class Primal, class Dual>
void pdhg_loop(const EnergyModel& model, const kernels::PdhgSteps& steps, const VertexFunction& v,
               double lambda, int iterations, VertexFunction& u, std::vector<double>& y,
               Primal primal, Dual dual) {
  VertexFunction u_bar = u;
  std::span<const double> metric(model.metric().data(), model.size());
  std::span<const double> vs(v.data(), v.size());
  for (int it = 0; it < iterations; ++it) {
    primal(model.incidence(), model.terms(), steps, metric, vs, lambda, y,
           std::span<double>(u.data(), u.size()), std::span<double>(u_bar.data(), u_bar.size()));
    dual(model.terms(), steps, std::span<const double>(u_bar.data(), u_bar.size()), y);
  }
}

void run_pdhg(const EnergyModel& model, const kernels::PdhgSteps& steps, const VertexFunction& v,
              double lambda, int iterations, kernels::Backend backend, VertexFunction& u,
              std::vector<double>& y) {
  if (backend == kernels::Backend::OpenMP) {
    pdhg_loop(model, steps, v, lambda, iterations, u, y, kernels::omp::pdhg_primal,
              kernels::omp::pdhg_dual);
  } else {
    pdhg_loop(model, steps, v, lambda, iterations, u, y, kernels::serial::pdhg_primal,
              kernels::serial::pdhg_dual);
  }
}

}  // namespace

VertexFunction pdhg_iterate(const EnergyModel& model, const VertexFunction& v, double lambda,
                            int iterations, kernels::Backend backend, std::vector<double>& dual) {
  const auto steps = kernels::pdhg_steps(model.size(), model.terms(), model.incidence());
  VertexFunction u = v;
  dual.assign(model.term_count(), 0.0);
  run_pdhg(model, steps, v, lambda, iterations, backend, u, dual);
  return u;
}

ProxResult prox(const EnergyModel& model, const VertexFunction& v, double lambda,
                const ProxOptions& options, const std::vector<std::int8_t>* hint) {
  if (!(lambda > 0.0)) throw std::invalid_argument("prox step must be positive");
  if (!(options.tol > 0.0)) throw std::invalid_argument("prox tolerance must be positive");
  if (v.size() != model.size()) throw std::invalid_argument("prox input has the wrong length");
  const double scale = 1.0 + v.cwiseAbs().maxCoeff();
  ProxResult res;
  if (hint && hint->size() == static_cast<std::size_t>(model.term_count()) &&
      polish(model, v, lambda, *hint, v, options.tol, res)) {
    return res;
  }
  if (polish(model, v, lambda, sign_pattern(model, v, 1e-12 * scale), v, options.tol, res)) {
    return res;
  }

  const auto steps = kernels::pdhg_steps(model.size(), model.terms(), model.incidence());
  VertexFunction u = v;
  std::vector<double> y(model.term_count(), 0.0);
  int done = 0;
  int chunk = options.polish_every;
  double best_stat = INFINITY;
  double best_comp = INFINITY;
  VertexFunction best = u;
  while (done < options.max_iter) {
    const int todo = std::min(chunk, options.max_iter - done);
    run_pdhg(model, steps, v, lambda, todo, options.backend, u, y);
    done += todo;
    chunk = std::min(chunk * 2, 2000);
    for (double delta : {1e-3, 1e-5, 1e-7, 1e-9}) {
      if (polish(model, v, lambda, sign_pattern(model, u, delta * scale), u, options.tol, res)) {
        res.iterations = done;
        log::debug("prox polished after " + std::to_string(done) + " iterations");
        return res;
      }
    }
    VertexFunction sub = (v - u) / lambda;
    SubgradientCertificate cert = certify(model, u, sub, y);
    if (cert.stationarity < best_stat) {
      best_stat = cert.stationarity;
      best_comp = cert.complementarity;
      best = u;
    }
    if (cert.stationarity <= options.tol && cert.complementarity <= options.tol) {
      res.u = u;
      res.subgradient = std::move(sub);
      res.certificate = std::move(cert);
      res.iterations = done;
      return res;
    }
  }
  std::ostringstream msg;
  msg << "prox did not converge in " << done << " iterations (stationarity " << best_stat
      << ", complementarity " << best_comp << ", tol " << options.tol << ")";
  throw ProxNonConvergence(msg.str(), best, best_stat, best_comp, done);
}

ProxResult prox(const Functional& functional, const VertexFunction& v, double lambda, double tol) {
  ProxOptions opt;
  opt.tol = tol;
  return prox(compile(functional), v, lambda, opt);
}

}  // namespace rwflow
