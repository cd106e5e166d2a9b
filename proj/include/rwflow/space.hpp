#pragma once

// Finite reversible random walk spaces and the nonlocal calculus on them.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rwflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A real function on the vertex set.
using VertexFunction = Vec;

class SpaceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unordered support pair with tail < head. Loops are not stored here.
struct SupportEdge {
  int tail = 0;
  int head = 0;
  double weight = 0.0;  // nu[tail] * M[tail][head], symmetric by detailed balance
};

inline constexpr double kStochasticTol = 1e-12;
inline constexpr double kDetailedBalanceTol = 1e-10;

/// Finite state set with row-stochastic kernel m_x({y}) = M(x, y) and a
/// positive reversible measure nu. Immutable after construction.
class RandomWalkSpace {
 public:
  RandomWalkSpace(Mat kernel, Vec measure);

  int size() const { return static_cast<int>(measure_.size()); }
  const Mat& kernel() const { return kernel_; }
  const Vec& measure() const { return measure_; }
  double kernel(int x, int y) const { return kernel_(x, y); }
  double measure(int x) const { return measure_(x); }
  double total_measure() const { return measure_.sum(); }

  /// Support pairs x < y with M(x, y) > 0, ordered lexicographically.
  std::span<const SupportEdge> edges() const { return edges_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  /// Index of the unordered pair {x, y} in edges() together with the
  /// orientation sign (+1 when x < y). Returns {-1, 0} off support.
  std::pair<int, int> edge_index(int x, int y) const;

  /// Neighbours y != x with M(x, y) > 0.
  std::span<const int> neighbours(int x) const;

 private:
  Mat kernel_;
  Vec measure_;
  std::vector<SupportEdge> edges_;
  std::vector<int> adj_offsets_;
  std::vector<int> adj_;
};

/// Antisymmetric function on support pairs, stored once per unordered pair
/// as the value z(tail, head); z(head, tail) is its negation.
class EdgeField {
 public:
  EdgeField() = default;
  explicit EdgeField(const RandomWalkSpace& space) : values_(space.edge_count(), 0.0) {}
  explicit EdgeField(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double& operator[](std::size_t e) { return values_[e]; }
  double operator[](std::size_t e) const { return values_[e]; }

  /// Oriented value z(x, y); zero off support.
  double at(const RandomWalkSpace& space, int x, int y) const;
  void set(const RandomWalkSpace& space, int x, int y, double value);

 private:
  std::vector<double> values_;
};

/// M(x, y) = w_xy / d_x, nu = d. Loops w_xx are kept as self-loop mass.
RandomWalkSpace from_weighted_graph(const Mat& weights);

/// grad u(x, y) = u(y) - u(x) on support pairs.
EdgeField nonlocal_gradient(const RandomWalkSpace& space, const VertexFunction& u);

/// (div_m z)(x) = sum_y z(x, y) M(x, y).
VertexFunction divergence_m(const RandomWalkSpace& space, const EdgeField& z);

/// |sum_x v div z nu + 1/2 sum_{x,y} z grad v nu M|; zero in exact arithmetic.
double integration_by_parts_residual(const RandomWalkSpace& space, const VertexFunction& v,
                                     const EdgeField& z);

/// L_m(A, B) = sum_{x in A} nu(x) m_x(B).
double m_interaction(const RandomWalkSpace& space, std::span<const int> a, std::span<const int> b);

bool is_m_connected(const RandomWalkSpace& space);

/// Connected components of the support graph, as a component label per vertex.
std::vector<int> support_components(const RandomWalkSpace& space, int* count = nullptr);

double mass(const Vec& measure, const VertexFunction& u);
double mean(const Vec& measure, const VertexFunction& u);
inline double mass(const RandomWalkSpace& space, const VertexFunction& u) {
  return mass(space.measure(), u);
}
inline double mean(const RandomWalkSpace& space, const VertexFunction& u) {
  return mean(space.measure(), u);
}

/// nu-weighted L^q norms; q = infinity is the max norm.
double norm_l1(const Vec& measure, const VertexFunction& u);
double norm_l2(const Vec& measure, const VertexFunction& u);
double norm_linf(const VertexFunction& u);
double norm_lq(const Vec& measure, const VertexFunction& u, double q);

/// Positive part, componentwise.
VertexFunction positive_part(const VertexFunction& u);

}  // namespace rwflow
