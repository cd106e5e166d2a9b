#include "rwflow/space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace rwflow {

RandomWalkSpace::RandomWalkSpace(Mat kernel, Vec measure)
    : kernel_(std::move(kernel)), measure_(std::move(measure)) {
  const auto n = measure_.size();
  if (n == 0) throw SpaceError("random walk space must have at least one vertex");
  if (kernel_.rows() != n || kernel_.cols() != n) {
    throw SpaceError("kernel must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  for (Eigen::Index x = 0; x < n; ++x) {
    if (!(measure_(x) > 0.0) || !std::isfinite(measure_(x))) {
      throw SpaceError("measure must be positive and finite at vertex " + std::to_string(x));
    }
    double row = 0.0;
    for (Eigen::Index y = 0; y < n; ++y) {
      if (!(kernel_(x, y) >= 0.0) || !std::isfinite(kernel_(x, y))) {
        throw SpaceError("kernel entry (" + std::to_string(x) + "," + std::to_string(y) +
                         ") must be nonnegative and finite");
      }
      row += kernel_(x, y);
    }
    if (std::abs(row - 1.0) > kStochasticTol * std::max<double>(1.0, static_cast<double>(n))) {
      std::ostringstream msg;
      msg << "kernel row " << x << " sums to " << row << ", expected 1";
      throw SpaceError(msg.str());
    }
  }
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = x + 1; y < n; ++y) {
      const double fwd = measure_(x) * kernel_(x, y);
      const double bwd = measure_(y) * kernel_(y, x);
      const double scale = std::max(std::abs(fwd), std::abs(bwd));
      if (std::abs(fwd - bwd) > kDetailedBalanceTol * scale) {
        std::ostringstream msg;
        msg << "detailed balance fails for pair (" << x << "," << y << "): " << fwd << " vs " << bwd;
        throw SpaceError(msg.str());
      }
      if (scale > 0.0) {
        edges_.push_back({static_cast<int>(x), static_cast<int>(y), 0.5 * (fwd + bwd)});
      }
    }
  }
  adj_offsets_.assign(n + 1, 0);
  for (const auto& e : edges_) {
    ++adj_offsets_[e.tail + 1];
    ++adj_offsets_[e.head + 1];
  }
  std::partial_sum(adj_offsets_.begin(), adj_offsets_.end(), adj_offsets_.begin());
  adj_.resize(adj_offsets_.back());
  std::vector<int> fill(adj_offsets_.begin(), adj_offsets_.end() - 1);
  for (const auto& e : edges_) {
    adj_[fill[e.tail]++] = e.head;
    adj_[fill[e.head]++] = e.tail;
  }
  for (Eigen::Index x = 0; x < n; ++x) {
    std::sort(adj_.begin() + adj_offsets_[x], adj_.begin() + adj_offsets_[x + 1]);
  }
}

std::pair<int, int> RandomWalkSpace::edge_index(int x, int y) const {
  if (x == y) return {-1, 0};
  const int lo = std::min(x, y);
  const int hi = std::max(x, y);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), std::pair{lo, hi},
                             [](const SupportEdge& e, const std::pair<int, int>& key) {
                               return std::pair{e.tail, e.head} < key;
                             });
  if (it == edges_.end() || it->tail != lo || it->head != hi) return {-1, 0};
  return {static_cast<int>(it - edges_.begin()), x < y ? 1 : -1};
}

std::span<const int> RandomWalkSpace::neighbours(int x) const {
  return std::span<const int>(adj_).subspan(adj_offsets_[x], adj_offsets_[x + 1] - adj_offsets_[x]);
}

double EdgeField::at(const RandomWalkSpace& space, int x, int y) const {
  auto [e, sign] = space.edge_index(x, y);
  if (e < 0) return 0.0;
  return sign * values_[e];
}

void EdgeField::set(const RandomWalkSpace& space, int x, int y, double value) {
  auto [e, sign] = space.edge_index(x, y);
  if (e < 0) {
    throw SpaceError("pair (" + std::to_string(x) + "," + std::to_string(y) + ") is not in the support");
  }
  values_[e] = sign * value;
}

RandomWalkSpace from_weighted_graph(const Mat& weights) {
  const auto n = weights.rows();
  if (weights.cols() != n) throw SpaceError("weight matrix must be square");
  Vec degree = Vec::Zero(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      const double w = weights(x, y);
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw SpaceError("weight (" + std::to_string(x) + "," + std::to_string(y) +
                         ") must be nonnegative and finite");
      }
      if (w != weights(y, x)) {
        throw SpaceError("weights are not symmetric at (" + std::to_string(x) + "," +
                         std::to_string(y) + ")");
      }
      degree(x) += w;
    }
  }
  Mat kernel(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    if (!(degree(x) > 0.0)) {
      throw SpaceError("vertex " + std::to_string(x) + " has zero degree");
    }
    kernel.row(x) = weights.row(x) / degree(x);
  }
  return RandomWalkSpace(std::move(kernel), std::move(degree));
}

EdgeField nonlocal_gradient(const RandomWalkSpace& space, const VertexFunction& u) {
  if (u.size() != space.size()) throw SpaceError("function length does not match space");
  EdgeField grad(space);
  const auto edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) grad[e] = u(edges[e].head) - u(edges[e].tail);
  return grad;
}

VertexFunction divergence_m(const RandomWalkSpace& space, const EdgeField& z) {
  if (z.size() != static_cast<std::size_t>(space.edge_count())) {
    throw SpaceError("edge field size does not match space");
  }
  VertexFunction div = VertexFunction::Zero(space.size());
  const auto edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& ed = edges[e];
    div(ed.tail) += z[e] * space.kernel(ed.tail, ed.head);
    div(ed.head) -= z[e] * space.kernel(ed.head, ed.tail);
  }
  return div;
}

double integration_by_parts_residual(const RandomWalkSpace& space, const VertexFunction& v,
                                     const EdgeField& z) {
  const VertexFunction div = divergence_m(space, z);
  const EdgeField grad = nonlocal_gradient(space, v);
  double lhs = 0.0;
  for (int x = 0; x < space.size(); ++x) lhs += v(x) * div(x) * space.measure(x);
  // Both orientations of every pair contribute z * grad v identically.
  double rhs = 0.0;
  const auto edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& ed = edges[e];
    rhs += 0.5 * z[e] * grad[e] * space.measure(ed.tail) * space.kernel(ed.tail, ed.head);
    rhs += 0.5 * z[e] * grad[e] * space.measure(ed.head) * space.kernel(ed.head, ed.tail);
  }
  return std::abs(lhs + rhs);
}

double m_interaction(const RandomWalkSpace& space, std::span<const int> a, std::span<const int> b) {
  double total = 0.0;
  for (int x : a) {
    double m_xb = 0.0;
    for (int y : b) m_xb += space.kernel(x, y);
    total += space.measure(x) * m_xb;
  }
  return total;
}

std::vector<int> support_components(const RandomWalkSpace& space, int* count) {
  const int n = space.size();
  std::vector<int> label(n, -1);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      for (int y : space.neighbours(x)) {
        if (label[y] < 0) {
          label[y] = next;
          stack.push_back(y);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return label;
}

bool is_m_connected(const RandomWalkSpace& space) {
  int count = 0;
  support_components(space, &count);
  return count == 1;
}

double mass(const Vec& measure, const VertexFunction& u) { return measure.dot(u); }

double mean(const Vec& measure, const VertexFunction& u) { return measure.dot(u) / measure.sum(); }

double norm_l1(const Vec& measure, const VertexFunction& u) { return measure.dot(u.cwiseAbs()); }

double norm_l2(const Vec& measure, const VertexFunction& u) {
  return std::sqrt(measure.dot(u.cwiseAbs2()));
}

double norm_linf(const VertexFunction& u) { return u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff(); }

double norm_lq(const Vec& measure, const VertexFunction& u, double q) {
  if (std::isinf(q)) return norm_linf(u);
  if (q == 1.0) return norm_l1(measure, u);
  if (q == 2.0) return norm_l2(measure, u);
  double s = 0.0;
  for (Eigen::Index x = 0; x < u.size(); ++x) s += measure(x) * std::pow(std::abs(u(x)), q);
  return std::pow(s, 1.0 / q);
}

VertexFunction positive_part(const VertexFunction& u) { return u.cwiseMax(0.0); }

}  // namespace rwflow
