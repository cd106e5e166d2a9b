#include "rwflow/exact.hpp"

#include "rwflow/log.hpp"

#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rwflow {

namespace odeint = boost::numeric::odeint;

AffineSolution::AffineSolution(double t0, Vec c0, const Mat& a, const Vec& b)
    : t0_(t0), c0_(std::move(c0)) {
  const auto m = c0_.size();
  aug_ = Mat::Zero(m + 1, m + 1);
  aug_.topLeftCorner(m, m) = a;
  aug_.col(m).head(m) = b;
}

Vec AffineSolution::at(double t) const {
  const auto m = c0_.size();
  Vec x(m + 1);
  x.head(m) = c0_;
  x(m) = 1.0;
  const Mat e = (aug_ * (t - t0_)).exp();
  return (e * x).head(m);
}

void HermiteSolution::push(double t, Vec c, Vec dc) {
  t_.push_back(t);
  c_.push_back(std::move(c));
  dc_.push_back(std::move(dc));
}

Vec HermiteSolution::at(double t) const {
  if (t_.empty()) throw std::logic_error("empty dense solution");
  if (t <= t_.front()) return c_.front();
  if (t >= t_.back()) return c_.back();
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
  const double h = t_[i + 1] - t_[i];
  if (h <= 0.0) return c_[i + 1];
  const double s = (t - t_[i]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * c_[i] + (s3 - 2 * s2 + s) * h * dc_[i] +
         (-2 * s3 + 3 * s2) * c_[i + 1] + (s3 - s2) * h * dc_[i + 1];
}

VertexFunction ExactResult::state_at(double t) const {
  for (const auto& seg : segments) {
    if (t <= seg.t1 || &seg == &segments.back()) return seg.state(std::min(t, seg.t1));
  }
  return final_state;
}

InternalDual segment_dual(const EnergyModel& model, const ModeSegment& segment, double t) {
  const ReducedSystem sys(model, segment.structure);
  const Vec c = segment.cluster_state(t);
  const VertexFunction u = expand(segment.structure, c);
  return recover_internal_g(model, segment.structure,
                            flow_target(model, segment.structure, u, sys.rhs(c)));
}

namespace {

// Event indicators: an event fires when a value turns positive.
class Probe {
 public:
  Probe(const EnergyModel& model, const ReducedSystem& sys, double merge_eps, double split_eps)
      : model_(model), sys_(sys), merge_eps_(merge_eps), split_eps_(split_eps) {
    const auto& s = sys.structure();
    const auto terms = model.terms();
    for (std::size_t k = 0; k < terms.size(); ++k) {
      if (terms[k].p != 1.0 || s.sigma[k] == 0) continue;
      if (s.cluster[terms[k].tail] == s.cluster[terms[k].head]) continue;
      merges_.push_back(static_cast<int>(k));
    }
    for (int c = 0; c < s.cluster_count(); ++c) {
      if (!s.internal[c].empty()) splits_.push_back(c);
    }
  }

  std::size_t count() const { return merges_.size() + splits_.size(); }
  bool is_merge(std::size_t i) const { return i < merges_.size(); }
  int merge_term(std::size_t i) const { return merges_[i]; }
  int split_cluster(std::size_t i) const { return splits_[i - merges_.size()]; }

  std::vector<double> eval(const Vec& c, InternalDual* dual_out = nullptr) const {
    const auto& s = sys_.structure();
    const auto terms = model_.terms();
    std::vector<double> v(count());
    for (std::size_t i = 0; i < merges_.size(); ++i) {
      const auto& t = terms[merges_[i]];
      v[i] = -s.sigma[merges_[i]] * (c(s.cluster[t.head]) - c(s.cluster[t.tail])) - merge_eps_;
    }
    if (!splits_.empty() || dual_out) {
      const VertexFunction u = expand(s, c);
      InternalDual dual = recover_internal_g(model_, s, flow_target(model_, s, u, sys_.rhs(c)));
      for (std::size_t j = 0; j < splits_.size(); ++j) {
        const int cl = splits_[j];
        v[merges_.size() + j] =
            dual.residual[cl] > 1e-9 ? 1.0 : dual.excess[cl] - split_eps_;
      }
      if (dual_out) *dual_out = std::move(dual);
    }
    return v;
  }

 private:
  const EnergyModel& model_;
  const ReducedSystem& sys_;
  double merge_eps_;
  double split_eps_;
  std::vector<int> merges_;
  std::vector<int> splits_;
};

class Stepper {
 public:
  virtual ~Stepper() = default;
  /// Advances and returns the interval on which state() is now valid.
  virtual std::pair<double, double> advance() = 0;
  virtual Vec state(double t) = 0;
  virtual int probes_per_interval() const = 0;
};

class AffineStepper : public Stepper {
 public:
  AffineStepper(double t0, const Vec& c0, const ReducedSystem& sys)
      : solution_(t0, c0, sys.a(), sys.b()), t_(t0) {
    const double norm = sys.a().size() ? sys.a().cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    dt_ = std::clamp(0.05 / (1.0 + norm), 1e-4, 0.05);
  }
  std::pair<double, double> advance() override {
    const double a = t_;
    t_ += dt_;
    return {a, t_};
  }
  Vec state(double t) override { return solution_.at(t); }
  int probes_per_interval() const override { return 1; }
  const AffineSolution& solution() const { return solution_; }

 private:
  AffineSolution solution_;
  double t_;
  double dt_;
};

using OdeState = std::vector<double>;

class DopriStepper : public Stepper {
 public:
  DopriStepper(double t0, const Vec& c0, const ReducedSystem& sys, double tol)
      : sys_(sys),
        stepper_(odeint::make_dense_output(tol * 1e-2, tol, odeint::runge_kutta_dopri5<OdeState>())) {
    OdeState x(c0.data(), c0.data() + c0.size());
    stepper_.initialize(x, t0, 1e-4);
  }
  std::pair<double, double> advance() override {
    auto rhs = [this](const OdeState& x, OdeState& dx, double) {
      const Vec c = Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
      const Vec r = sys_.rhs(c);
      dx.assign(r.data(), r.data() + r.size());
    };
    return stepper_.do_step(rhs);
  }
  Vec state(double t) override {
    OdeState x(static_cast<std::size_t>(sys_.dimension()));
    stepper_.calc_state(t, x);
    return Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
  }
  int probes_per_interval() const override { return 4; }

 private:
  const ReducedSystem& sys_;
  odeint::dense_output_runge_kutta<
      odeint::controlled_runge_kutta<odeint::runge_kutta_dopri5<OdeState>>>
      stepper_;
};

std::int8_t sign_of(double x) { return x > 0.0 ? 1 : -1; }

}  // namespace

ExactResult integrate_exact(const EnergyModel& model, const VertexFunction& u0, double T,
                            const ExactOptions& options) {
  if (!model.has_tv()) {
    throw std::invalid_argument("exact integration needs a total variation term; use implicit Euler");
  }
  if (u0.size() != model.size() || !u0.allFinite()) {
    throw std::invalid_argument("initial datum has the wrong length or is not finite");
  }
  if (!(T > 0.0)) throw std::invalid_argument("horizon must be positive");
  const auto terms = model.terms();
  const double scale = 1.0 + u0.cwiseAbs().maxCoeff();
  const double merge_eps = 1e-12 * scale;
  const double split_eps = 1e-11;
  const std::size_t guard =
      10 * static_cast<std::size_t>(model.size()) * std::max<std::size_t>(1, terms.size());

  ExactResult result;
  VertexFunction u = u0;
  auto sigma = select_mode(model, u, sign_pattern(model, u, 1e-14 * scale));
  {
    const ClusterStructure s = make_structure(model, sigma);
    u = expand(s, cluster_values(s, model, u));
  }
  double t = 0.0;
  std::size_t event_count = 0;

  while (true) {
    ClusterStructure s = make_structure(model, sigma);
    const ReducedSystem sys(model, s);
    const Vec c0 = cluster_values(s, model, u);
    const Probe probe(model, sys, merge_eps, split_eps);

    std::unique_ptr<Stepper> stepper;
    if (sys.affine()) {
      stepper = std::make_unique<AffineStepper>(t, c0, sys);
    } else {
      stepper = std::make_unique<DopriStepper>(t, c0, sys, options.ode_tol);
    }
    auto hermite = std::make_shared<HermiteSolution>();
    hermite->push(t, c0, sys.rhs(c0));

    bool found = false;
    double lo = t;
    double hi = t;
    std::vector<double> v_hi;
    std::vector<double> v0 = probe.eval(c0);
    if (std::any_of(v0.begin(), v0.end(), [](double x) { return x > 0.0; })) {
      found = true;
      v_hi = v0;
    }
    double seg_end = T;
    while (!found) {
      const auto [ta, tb] = stepper->advance();
      const double end = std::min(tb, T);
      const int k = stepper->probes_per_interval();
      double prev = ta;
      for (int i = 1; i <= k && !found; ++i) {
        const double p = i == k ? end : ta + (end - ta) * i / k;
        if (p <= prev) continue;
        std::vector<double> vals = probe.eval(stepper->state(p));
        if (std::any_of(vals.begin(), vals.end(), [](double x) { return x > 0.0; })) {
          found = true;
          lo = prev;
          hi = p;
          v_hi = std::move(vals);
        }
        prev = p;
      }
      if (found) break;
      const Vec c_end = stepper->state(end);
      hermite->push(end, c_end, sys.rhs(c_end));
      if (tb >= T) break;
    }

    if (!found) {
      ModeSegment seg{t, T, s, sys.affine() ? std::shared_ptr<const DenseSolution>(
                                                    std::make_shared<AffineSolution>(t, c0, sys.a(), sys.b()))
                                              : hermite,
                      "horizon"};
      result.final_state = seg.state(T);
      result.segments.push_back(std::move(seg));
      break;
    }

    // Locate each firing indicator inside [lo, hi].
    std::vector<std::pair<double, std::size_t>> fired;
    for (std::size_t i = 0; i < v_hi.size(); ++i) {
      if (!(v_hi[i] > 0.0)) continue;
      double a = lo;
      double b = hi;
      while (b - a > options.time_tol * std::max(1.0, std::abs(b))) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        if (probe.eval(stepper->state(m))[i] > 0.0) b = m; else a = m;
      }
      fired.emplace_back(b, i);
    }
    std::sort(fired.begin(), fired.end());
    const double te = fired.front().first;
    const double window = std::min(hi, te + options.event_tol);
    InternalDual dual;
    const Vec c_check = stepper->state(window);
    const std::vector<double> v_window = probe.eval(c_check);
    std::vector<std::size_t> active;
    for (const auto& [ti, i] : fired) {
      if (ti <= te + options.event_tol) active.push_back(i);
    }
    for (std::size_t i = 0; i < v_window.size(); ++i) {
      if (v_window[i] > 0.0 && std::find(active.begin(), active.end(), i) == active.end()) {
        active.push_back(i);
      }
    }
    const double t_event = std::max(te, window);
    const Vec ce = stepper->state(t_event);
    probe.eval(ce, &dual);
    hermite->push(t_event, ce, sys.rhs(ce));
    seg_end = t_event;

    bool any_merge = false;
    bool any_split = false;
    ExactEvent merge_ev{t_event, "merge", {}, {}};
    ExactEvent split_ev{t_event, "split", {}, {}};
    for (std::size_t i : active) {
      if (probe.is_merge(i)) {
        const int k = probe.merge_term(i);
        sigma[k] = 0;
        merge_ev.edges.emplace_back(terms[k].tail, terms[k].head);
        any_merge = true;
      }
    }
    u = expand(s, ce);
    if (any_merge) {
      const ClusterStructure merged = make_structure(model, sigma);
      for (std::size_t k = 0; k < terms.size(); ++k) {
        if (terms[k].p == 1.0 && merged.cluster[terms[k].tail] == merged.cluster[terms[k].head]) {
          sigma[k] = 0;
        }
      }
      const ClusterStructure snapped = make_structure(model, sigma);
      u = expand(snapped, cluster_values(snapped, model, u));
    }
    for (std::size_t i : active) {
      if (probe.is_merge(i)) continue;
      const int cl = probe.split_cluster(i);
      const int k = dual.worst[cl];
      if (k < 0) continue;
      sigma[k] = sign_of(dual.g[k]);
      split_ev.edges.emplace_back(terms[k].tail, terms[k].head);
      any_split = true;
    }
    ModeSegment seg{t, seg_end,
                    s,
                    sys.affine() ? std::shared_ptr<const DenseSolution>(
                                       std::make_shared<AffineSolution>(t, c0, sys.a(), sys.b()))
                                 : hermite,
                    any_merge ? "merge" : "split"};
    result.segments.push_back(std::move(seg));

    sigma = select_mode(model, u, sigma);
    {
      const ClusterStructure ns = make_structure(model, sigma);
      u = expand(ns, cluster_values(ns, model, u));
    }
    if (any_merge) {
      merge_ev.state = u;
      result.events.push_back(std::move(merge_ev));
    }
    if (any_split) {
      split_ev.state = u;
      result.events.push_back(std::move(split_ev));
    }
    {
      std::ostringstream msg;
      msg << "event at t = " << t_event << (any_merge ? " merge" : "") << (any_split ? " split" : "");
      log::debug(msg.str());
    }
    t = t_event;
    if (++event_count > guard) {
      throw CyclingError("mode cycling: more than " + std::to_string(guard) + " events before t = " +
                         std::to_string(t));
    }
    if (t >= T) {
      result.final_state = u;
      break;
    }
  }

  Trajectory& traj = result.trajectory;
  traj.metric = model.metric();
  traj.times = time_grid(T, std::min(options.sample_dt, T));
  for (double ti : traj.times) {
    traj.states.push_back(result.state_at(ti));
    traj.diagnostics.push_back(diagnose(model, traj.states.back()));
  }
  return result;
}

ExactResult integrate_exact(const Functional& functional, const VertexFunction& u0, double T,
                            const ExactOptions& options) {
  return integrate_exact(compile(functional), u0, T, options);
}

}  // namespace rwflow
