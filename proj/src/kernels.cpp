#include "rwflow/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rwflow::kernels {

Incidence Incidence::build(int vertices, std::span<const EnergyTerm> terms) {
  Incidence inc;
  inc.offsets.assign(vertices + 1, 0);
  for (const auto& t : terms) {
    ++inc.offsets[t.tail + 1];
    ++inc.offsets[t.head + 1];
  }
  std::partial_sum(inc.offsets.begin(), inc.offsets.end(), inc.offsets.begin());
  inc.term.resize(inc.offsets.back());
  inc.sign.resize(inc.offsets.back());
  std::vector<int> fill(inc.offsets.begin(), inc.offsets.end() - 1);
  for (int k = 0; k < static_cast<int>(terms.size()); ++k) {
    const int a = fill[terms[k].tail]++;
    inc.term[a] = k;
    inc.sign[a] = 1;
    const int b = fill[terms[k].head]++;
    inc.term[b] = k;
    inc.sign[b] = -1;
  }
  return inc;
}

PdhgSteps pdhg_steps(int vertices, std::span<const EnergyTerm> terms, const Incidence& inc) {
  PdhgSteps s;
  s.tau.assign(vertices, 0.0);
  s.sigma.assign(terms.size(), 0.0);
  for (int x = 0; x < vertices; ++x) {
    double row = 0.0;
    for (int a = inc.offsets[x]; a < inc.offsets[x + 1]; ++a) row += terms[inc.term[a]].weight;
    s.tau[x] = row > 0.0 ? 1.0 / row : 0.0;
  }
  for (std::size_t k = 0; k < terms.size(); ++k) s.sigma[k] = 0.5 / terms[k].weight;
  return s;
}

double growth_value(double d, double p) {
  const double a = std::abs(d);
  if (p == 1.0) return a;
  if (p == 2.0) return 0.5 * a * a;
  return std::pow(a, p) / p;
}

double growth_flux(double d, double p) {
  if (p == 1.0) return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  if (p == 2.0) return d;
  if (d == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(d), p - 1.0), d);
}

double prox_power(double y0, double c, double q) {
  const double a = std::abs(y0);
  if (a == 0.0) return 0.0;
  double t;
  if (q == 2.0) {
    t = a / (1.0 + c);
  } else if (q == 3.0) {
    t = 2.0 * a / (1.0 + std::sqrt(1.0 + 4.0 * c * a));
  } else if (q == 1.5) {
    const double s = 2.0 * a / (c + std::sqrt(c * c + 4.0 * a));
    t = s * s;
  } else {
    // t + c t^(q-1) = a on [0, a]; increasing in t.
    double lo = 0.0;
    double hi = a;
    t = a / (1.0 + c);
    for (int it = 0; it < 400; ++it) {
      const double f = t + c * std::pow(t, q - 1.0) - a;
      if (f > 0.0) hi = t; else lo = t;
      const double df = 1.0 + c * (q - 1.0) * std::pow(t, q - 2.0);
      double next = t - f / df;
      if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
      // Relative to t, not a: for q < 2 the root can sit far below a.
      if (std::abs(next - t) <= 4e-16 * next || hi - lo <= 4e-16 * hi) {
        t = next;
        break;
      }
      t = next;
    }
  }
  return std::copysign(t, y0);
}

namespace {

inline double dual_prox(const EnergyTerm& term, double sigma, double q) {
  if (term.p == 1.0) return std::clamp(q, -1.0, 1.0);
  const double conj = term.p / (term.p - 1.0);
  return prox_power(q, sigma * term.weight, conj);
}

inline double flux_at(const EnergyTerm* terms, const Incidence& inc, const double* z, int x) {
  double s = 0.0;
  for (int a = inc.offsets[x]; a < inc.offsets[x + 1]; ++a) {
    const int k = inc.term[a];
    s += inc.sign[a] * terms[k].weight * z[k];
  }
  return s;
}

inline void primal_at(const Incidence& inc, const EnergyTerm* terms, const PdhgSteps& steps,
                      const double* metric, const double* v, double lambda, const double* y,
                      double* u, double* u_bar, int x) {
  const double tau = steps.tau[x];
  const double old = u[x];
  const double m = metric[x] / lambda;
  double next;
  if (tau > 0.0) {
    const double w = old + tau * flux_at(terms, inc, y, x);
    next = (w / tau + m * v[x]) / (1.0 / tau + m);
  } else {
    next = v[x];
  }
  u[x] = next;
  u_bar[x] = 2.0 * next - old;
}

}  // namespace

namespace serial {

void differences(std::span<const EnergyTerm> terms, std::span<const double> u, std::span<double> d) {
  for (std::size_t k = 0; k < terms.size(); ++k) d[k] = u[terms[k].head] - u[terms[k].tail];
}

void flux_sum(std::span<const EnergyTerm> terms, const Incidence& inc, std::span<const double> z,
              std::span<double> out) {
  const int n = static_cast<int>(inc.offsets.size()) - 1;
  for (int x = 0; x < n; ++x) out[x] = flux_at(terms.data(), inc, z.data(), x);
}

void term_energies(std::span<const EnergyTerm> terms, std::span<const double> u, std::span<double> e) {
  for (std::size_t k = 0; k < terms.size(); ++k) {
    e[k] = terms[k].weight * growth_value(u[terms[k].head] - u[terms[k].tail], terms[k].p);
  }
}

void pdhg_primal(const Incidence& inc, std::span<const EnergyTerm> terms, const PdhgSteps& steps,
                 std::span<const double> metric, std::span<const double> v, double lambda,
                 std::span<const double> y, std::span<double> u, std::span<double> u_bar) {
  const int n = static_cast<int>(u.size());
  for (int x = 0; x < n; ++x) {
    primal_at(inc, terms.data(), steps, metric.data(), v.data(), lambda, y.data(), u.data(),
              u_bar.data(), x);
  }
}

void pdhg_dual(std::span<const EnergyTerm> terms, const PdhgSteps& steps,
               std::span<const double> u_bar, std::span<double> y) {
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& t = terms[k];
    const double q = y[k] + steps.sigma[k] * t.weight * (u_bar[t.head] - u_bar[t.tail]);
    y[k] = dual_prox(t, steps.sigma[k], q);
  }
}

}  // namespace serial

namespace omp {

void differences(std::span<const EnergyTerm> terms, std::span<const double> u, std::span<double> d) {
  const long m = static_cast<long>(terms.size());
#pragma omp parallel for schedule(static) if (m > kParallelThreshold)
  for (long k = 0; k < m; ++k) d[k] = u[terms[k].head] - u[terms[k].tail];
}

void flux_sum(std::span<const EnergyTerm> terms, const Incidence& inc, std::span<const double> z,
              std::span<double> out) {
  const int n = static_cast<int>(inc.offsets.size()) - 1;
  const long work = static_cast<long>(inc.term.size());
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (int x = 0; x < n; ++x) out[x] = flux_at(terms.data(), inc, z.data(), x);
}

void term_energies(std::span<const EnergyTerm> terms, std::span<const double> u, std::span<double> e) {
  const long m = static_cast<long>(terms.size());
#pragma omp parallel for schedule(static) if (m > kParallelThreshold)
  for (long k = 0; k < m; ++k) {
    e[k] = terms[k].weight * growth_value(u[terms[k].head] - u[terms[k].tail], terms[k].p);
  }
}

void pdhg_primal(const Incidence& inc, std::span<const EnergyTerm> terms, const PdhgSteps& steps,
                 std::span<const double> metric, std::span<const double> v, double lambda,
                 std::span<const double> y, std::span<double> u, std::span<double> u_bar) {
  const int n = static_cast<int>(u.size());
  const long work = static_cast<long>(inc.term.size());
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (int x = 0; x < n; ++x) {
    primal_at(inc, terms.data(), steps, metric.data(), v.data(), lambda, y.data(), u.data(),
              u_bar.data(), x);
  }
}

void pdhg_dual(std::span<const EnergyTerm> terms, const PdhgSteps& steps,
               std::span<const double> u_bar, std::span<double> y) {
  const long m = static_cast<long>(terms.size());
#pragma omp parallel for schedule(static) if (m > kParallelThreshold)
  for (long k = 0; k < m; ++k) {
    const auto& t = terms[k];
    const double q = y[k] + steps.sigma[k] * t.weight * (u_bar[t.head] - u_bar[t.tail]);
    y[k] = dual_prox(t, steps.sigma[k], q);
  }
}

}  // namespace omp
}  // namespace rwflow::kernels
