#include "rwflow/flow.hpp"

#include "rwflow/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rwflow {

Diagnostics diagnose(const EnergyModel& model, const VertexFunction& u) {
  Diagnostics d;
  d.mass = mass(model.metric(), u);
  d.energy = eval_energy(model, u);
  const VertexFunction dev = u.array() - mean(model.metric(), u);
  d.dist_l1 = norm_l1(model.metric(), dev);
  d.dist_l2 = norm_l2(model.metric(), dev);
  return d;
}

std::vector<double> time_grid(double T, double h) {
  if (!(T > 0.0) || !(h > 0.0) || h > T * (1.0 + 1e-12)) {
    throw std::invalid_argument("time grid needs T > 0 and 0 < h <= T");
  }
  const auto steps = static_cast<long>(std::ceil(T / h - 1e-9));
  std::vector<double> t(steps + 1);
  for (long k = 0; k <= steps; ++k) t[k] = std::min(T, static_cast<double>(k) * h);
  t.back() = T;
  return t;
}

Trajectory implicit_euler(const EnergyModel& model, const VertexFunction& u0, double T, double h,
                          double tol, const Source& source) {
  if (u0.size() != model.size()) throw std::invalid_argument("initial datum has the wrong length");
  if (!u0.allFinite()) throw std::invalid_argument("initial datum must be finite");
  Trajectory traj;
  traj.metric = model.metric();
  traj.tol = tol;
  traj.times = time_grid(T, h);
  traj.states.reserve(traj.times.size());
  traj.states.push_back(u0);
  traj.diagnostics.push_back(diagnose(model, u0));
  ProxOptions opt;
  opt.tol = tol;
  std::vector<std::int8_t> pattern;
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const double dt = traj.times[k + 1] - traj.times[k];
    VertexFunction v = traj.states.back();
    if (source) {
      VertexFunction f = source(traj.times[k]);
      if (f.size() != model.size()) throw std::invalid_argument("source has the wrong length");
      v += dt * f;
      traj.sources.push_back(std::move(f));
    }
    ProxResult r;
    try {
      r = prox(model, v, dt, opt, pattern.empty() ? nullptr : &pattern);
    } catch (const ProxNonConvergence& e) {
      std::ostringstream msg;
      msg << "step " << k << " (t = " << traj.times[k] << "): " << e.what();
      throw FlowError(msg.str(), static_cast<int>(k), e.stationarity(), e.complementarity());
    }
    pattern = r.pattern;
    traj.states.push_back(r.u);
    traj.diagnostics.push_back(diagnose(model, r.u));
    traj.certificates.push_back(std::move(r.certificate));
  }
  log::info("implicit Euler finished " + std::to_string(traj.times.size() - 1) + " steps");
  return traj;
}

Trajectory implicit_euler(const FlowProblem& problem) {
  return implicit_euler(compile(problem.functional), problem.u0, problem.T, problem.h, problem.tol,
                        problem.source);
}

ContractionReport check_contraction(const Trajectory& a, const Trajectory& b, double q) {
  if (a.times.size() != b.times.size()) throw std::invalid_argument("trajectory grids differ");
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    if (std::abs(a.times[k] - b.times[k]) > 1e-12 * (1.0 + std::abs(a.times[k]))) {
      throw std::invalid_argument("trajectory grids differ at sample " + std::to_string(k));
    }
  }
  if (a.sources.size() != b.sources.size()) throw std::invalid_argument("source samples differ");
  ContractionReport rep;
  rep.q = q;
  rep.max_excess = -std::numeric_limits<double>::infinity();
  const auto gap = [&](const VertexFunction& x, const VertexFunction& y) {
    return norm_lq(a.metric, positive_part(x - y), q);
  };
  double budget = gap(a.states[0], b.states[0]);
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    if (k > 0 && !a.sources.empty()) {
      budget += (a.times[k] - a.times[k - 1]) * gap(a.sources[k - 1], b.sources[k - 1]);
    }
    const double excess = gap(a.states[k], b.states[k]) - budget;
    if (excess > rep.max_excess) {
      rep.max_excess = excess;
      rep.at_time = a.times[k];
    }
  }
  return rep;
}

ConservationReport conservation_report(const Trajectory& traj) {
  ConservationReport rep;
  const double m0 = mass(traj.metric, traj.states.front());
  for (const auto& u : traj.states) rep.max_drift = std::max(rep.max_drift, std::abs(mass(traj.metric, u) - m0));
  const double T = traj.times.back();
  const double h = traj.times.size() > 1 ? traj.times[1] - traj.times[0] : T;
  rep.bound = static_cast<double>(traj.metric.size()) * std::max(traj.tol, 1e-15) * T / std::max(h, 1e-300);
  return rep;
}

std::optional<double> extinction_time(const Trajectory& traj, double eps) {
  std::optional<double> t;
  for (std::size_t k = traj.times.size(); k-- > 0;) {
    const auto& u = traj.states[k];
    const double d = norm_l2(traj.metric, u.array() - mean(traj.metric, u));
    if (d > eps) break;
    t = traj.times[k];
  }
  return t;
}

DecayReport decay_bound_check(const Trajectory& traj, double lambda, DecayMode mode, double q) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("Poincare constant must be nonnegative");
  DecayReport rep;
  rep.mode = mode;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  const auto& u0 = traj.states.front();
  const double bar = mean(traj.metric, u0);
  const double y0 = norm_l2(traj.metric, u0.array() - bar);
  const double u0sq = std::pow(norm_l2(traj.metric, u0), 2);
  if (mode == DecayMode::QTwoPoincare && !(q >= 1.0 && q <= 2.0)) {
    throw std::invalid_argument("(q,2) decay needs 1 <= q <= 2");
  }
  switch (mode) {
    case DecayMode::OnePoincare: rep.predicted_extinction = INFINITY; break;
    case DecayMode::TwoPoincare: rep.predicted_extinction = lambda > 0 ? y0 / lambda : INFINITY; break;
    case DecayMode::QTwoPoincare:
      rep.predicted_extinction =
          q < 2.0 && lambda > 0 ? std::pow(y0, 2.0 - q) / (q * (2.0 - q) * lambda) : INFINITY;
      break;
  }
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const double t = traj.times[k];
    const auto& u = traj.states[k];
    double observed;
    double bound;
    switch (mode) {
      case DecayMode::OnePoincare:
        if (t <= 0.0) continue;
        observed = norm_l1(traj.metric, u.array() - bar);
        bound = lambda > 0 ? u0sq / (2.0 * lambda * t) : INFINITY;
        break;
      case DecayMode::TwoPoincare:
        observed = norm_l2(traj.metric, u.array() - bar);
        bound = std::max(0.0, y0 - lambda * t);
        break;
      case DecayMode::QTwoPoincare:
      default: {
        const double y = norm_l2(traj.metric, u.array() - bar);
        if (q < 2.0) {
          observed = std::pow(y, 2.0 - q);
          bound = std::max(0.0, std::pow(y0, 2.0 - q) - q * (2.0 - q) * lambda * t);
        } else {
          observed = y;
          bound = y0 * std::exp(-2.0 * lambda * t);
        }
        break;
      }
    }
    const double violation = observed - bound;
    if (violation > rep.max_violation) {
      rep.max_violation = violation;
      rep.at_time = t;
    }
  }
  return rep;
}

DecayMode parse_decay_mode(const std::string& name) {
  if (name == "1" || name == "one" || name == "1-poincare") return DecayMode::OnePoincare;
  if (name == "2" || name == "two" || name == "2-poincare") return DecayMode::TwoPoincare;
  if (name == "q2" || name == "(q,2)" || name == "q2-poincare") return DecayMode::QTwoPoincare;
  throw std::invalid_argument("unknown decay mode '" + name + "'");
}

double diagnostics_drift(const EnergyModel& model, const Trajectory& traj) {
  double drift = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const Diagnostics d = diagnose(model, traj.states[k]);
    const Diagnostics& s = traj.diagnostics[k];
    drift = std::max({drift, std::abs(d.mass - s.mass), std::abs(d.energy - s.energy),
                      std::abs(d.dist_l1 - s.dist_l1), std::abs(d.dist_l2 - s.dist_l2)});
  }
  return drift;
}

}  // namespace rwflow
