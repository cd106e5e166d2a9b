#pragma once

#include "rwflow/exact.hpp"
#include "rwflow/flow.hpp"
#include "rwflow/functionals.hpp"

#include <random>
#include <string>

namespace fixtures {

using namespace rwflow;

inline Mat path_weights(double a, double b) {
  Mat w = Mat::Zero(3, 3);
  w(0, 1) = w(1, 0) = a;
  w(1, 2) = w(2, 1) = b;
  return w;
}

inline RandomWalkSpace path3(double a = 1.0, double b = 1.0) { return from_weighted_graph(path_weights(a, b)); }

inline RandomWalkSpace two_vertex(double w = 1.0) {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = m(1, 0) = w;
  return from_weighted_graph(m);
}

inline RandomWalkSpace cycle4() {
  Mat w = Mat::Zero(4, 4);
  for (int i = 0; i < 4; ++i) w(i, (i + 1) % 4) = w((i + 1) % 4, i) = 1.0;
  return from_weighted_graph(w);
}

inline RandomWalkSpace linear4() {
  Mat w = Mat::Zero(4, 4);
  w(0, 3) = w(3, 0) = 1.0;
  w(0, 1) = w(1, 0) = 1.0;
  w(1, 2) = w(2, 1) = 1.0;
  return from_weighted_graph(w);
}

/// TV plus quadratic on the same 3-path.
inline TwoStructureProblem three_path(double a, double b) {
  return TwoStructureProblem(path3(a, b), path3(a, b), GrowthSpec::tv(), GrowthSpec::power(2.0));
}

inline PartitionProblem four_cycle_partition() {
  return build_partition_kernels(cycle4(), {{3}, {2}, {1}, {0}}, {{1}, {0}, {3}, {2}});
}

inline PartitionProblem linear_four_partition() {
  return build_partition_kernels(linear4(), {{3}, {2}, {1}, {0}}, {{1}, {0}, {}, {}});
}

/// Random connected weighted graph: a random spanning tree plus extra edges.
inline Mat random_connected_weights(int n, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> w(lo, hi);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Mat m = Mat::Zero(n, n);
  for (int v = 1; v < n; ++v) {
    const int u = std::uniform_int_distribution<int>(0, v - 1)(rng);
    m(u, v) = m(v, u) = w(rng);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (m(i, j) == 0.0 && coin(rng) < 0.3) m(i, j) = m(j, i) = w(rng);
    }
  }
  return m;
}

inline VertexFunction random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VertexFunction v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline std::string problem_path(const std::string& name) { return std::string(RWFLOW_PROBLEMS_DIR) + "/" + name; }

}  // namespace fixtures
