#pragma once

// Random walk spaces obtained by discretising a radial convolution kernel on a
// box. Grid points are lo + i h along each axis; each carries volume h^N.

#include "rwflow/functionals.hpp"

#include <string>
#include <utility>
#include <vector>

namespace rwflow {

enum class KernelProfile { Uniform, Triangle, Table };

KernelProfile parse_profile(const std::string& name);

/// Radial density J(|x|) supported on |x| <= radius with unit integral over R^N.
class KernelSpec {
 public:
  KernelSpec(int dim, KernelProfile profile, double radius, std::vector<double> table = {});

  int dim() const { return dim_; }
  double radius() const { return radius_; }
  KernelProfile profile() const { return profile_; }
  double density(double r) const;
  /// Integral over R^N by radial quadrature; 1 up to quadrature error.
  double total_mass() const;

 private:
  double shape(double r) const;

  int dim_;
  KernelProfile profile_;
  double radius_;
  std::vector<double> table_;
  double scale_ = 1.0;
};

class GridDomain {
 public:
  GridDomain(std::vector<std::pair<double, double>> box, double h);

  int dim() const { return static_cast<int>(box_.size()); }
  double h() const { return h_; }
  int size() const { return size_; }
  const std::vector<int>& counts() const { return counts_; }
  const std::vector<std::pair<double, double>>& box() const { return box_; }
  double cell_volume() const;
  std::vector<double> point(int index) const;

  /// Indicator of the union of axis-aligned boxes (one interval per axis).
  VertexFunction indicator(const std::vector<std::vector<std::pair<double, double>>>& boxes) const;

 private:
  std::vector<std::pair<double, double>> box_;
  double h_;
  std::vector<int> counts_;
  int size_ = 0;
};

/// M(x, y) = J(|x - y|) h^N for y != x, the remaining mass on the loop, nu = h^N.
RandomWalkSpace build_kernel_space(const KernelSpec& kernel, const GridDomain& grid);

/// Two structures on one grid (mu = 1), first with kernel j, second with g.
TwoStructureProblem build_two_kernel_problem(const KernelSpec& j, const KernelSpec& g,
                                             const GridDomain& grid, GrowthSpec growth1,
                                             GrowthSpec growth2);

}  // namespace rwflow
