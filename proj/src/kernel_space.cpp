#include "rwflow/kernel_space.hpp"

#include "rwflow/log.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace rwflow {

KernelProfile parse_profile(const std::string& name) {
  if (name == "uniform") return KernelProfile::Uniform;
  if (name == "triangle") return KernelProfile::Triangle;
  if (name == "table") return KernelProfile::Table;
  throw std::invalid_argument("unknown kernel profile '" + name + "'");
}

namespace {

// Surface area of the unit sphere in R^N.
double sphere_area(int dim) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) / boost::math::tgamma(0.5 * dim);
}

}  // namespace

KernelSpec::KernelSpec(int dim, KernelProfile profile, double radius, std::vector<double> table)
    : dim_(dim), profile_(profile), radius_(radius), table_(std::move(table)) {
  if (dim_ < 1 || dim_ > 3) throw std::invalid_argument("kernel dimension must be 1, 2 or 3");
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) throw std::invalid_argument("kernel radius must be positive");
  if (profile_ == KernelProfile::Table) {
    if (table_.size() < 2) throw std::invalid_argument("kernel table needs at least two values");
    for (double v : table_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("kernel table must be nonnegative");
    }
  }
  const auto integrand = [this](double r) { return shape(r) * std::pow(r, dim_ - 1); };
  const double raw = sphere_area(dim_) *
                     boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, radius_, 15, 1e-14);
  if (!(raw > 0.0)) throw std::invalid_argument("kernel profile integrates to zero");
  scale_ = 1.0 / raw;
}

double KernelSpec::shape(double r) const {
  if (r < 0.0 || r > radius_) return 0.0;
  switch (profile_) {
    case KernelProfile::Uniform: return 1.0;
    case KernelProfile::Triangle: return 1.0 - r / radius_;
    case KernelProfile::Table: {
      const double pos = r / radius_ * static_cast<double>(table_.size() - 1);
      const auto i = std::min(static_cast<std::size_t>(pos), table_.size() - 2);
      const double f = pos - static_cast<double>(i);
      return (1.0 - f) * table_[i] + f * table_[i + 1];
    }
  }
  return 0.0;
}

double KernelSpec::density(double r) const { return scale_ * shape(r); }

double KernelSpec::total_mass() const {
  const auto integrand = [this](double r) { return density(r) * std::pow(r, dim_ - 1); };
  return sphere_area(dim_) *
         boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, radius_, 15, 1e-14);
}

GridDomain::GridDomain(std::vector<std::pair<double, double>> box, double h)
    : box_(std::move(box)), h_(h) {
  if (box_.empty() || box_.size() > 3) throw std::invalid_argument("grid box must have 1 to 3 axes");
  if (!(h_ > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  size_ = 1;
  for (const auto& [lo, hi] : box_) {
    if (!(hi > lo)) throw std::invalid_argument("grid box axes need lo < hi");
    const int c = static_cast<int>(std::floor((hi - lo) / h_ + 1e-9)) + 1;
    counts_.push_back(c);
    size_ *= c;
  }
}

double GridDomain::cell_volume() const { return std::pow(h_, dim()); }

std::vector<double> GridDomain::point(int index) const {
  std::vector<double> p(box_.size());
  for (std::size_t a = 0; a < box_.size(); ++a) {
    const int i = index % counts_[a];
    index /= counts_[a];
    p[a] = box_[a].first + i * h_;
  }
  return p;
}

VertexFunction GridDomain::indicator(
    const std::vector<std::vector<std::pair<double, double>>>& boxes) const {
  VertexFunction u = VertexFunction::Zero(size_);
  for (int i = 0; i < size_; ++i) {
    const auto p = point(i);
    for (const auto& b : boxes) {
      if (b.size() != box_.size()) throw std::invalid_argument("indicator box has the wrong dimension");
      bool inside = true;
      for (std::size_t a = 0; a < p.size(); ++a) {
        inside = inside && p[a] >= b[a].first - 1e-12 && p[a] <= b[a].second + 1e-12;
      }
      if (inside) {
        u(i) = 1.0;
        break;
      }
    }
  }
  return u;
}

RandomWalkSpace build_kernel_space(const KernelSpec& kernel, const GridDomain& grid) {
  if (kernel.dim() != grid.dim()) throw SpaceError("kernel and grid dimensions differ");
  if (grid.h() > 0.5 * kernel.radius() + 1e-12) {
    log::warn("grid spacing exceeds half the kernel radius; the kernel is poorly resolved");
  }
  const int n = grid.size();
  const double vol = grid.cell_volume();
  Mat m = Mat::Zero(n, n);
  std::vector<std::vector<double>> pts(n);
  for (int i = 0; i < n; ++i) pts[i] = grid.point(i);
  const double r2max = kernel.radius() * kernel.radius() * (1.0 + 1e-12);
  int bad = -1;
#pragma omp parallel for schedule(static)
  for (int x = 0; x < n; ++x) {
    double row = 0.0;
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      double r2 = 0.0;
      for (std::size_t a = 0; a < pts[x].size(); ++a) r2 += (pts[x][a] - pts[y][a]) * (pts[x][a] - pts[y][a]);
      if (r2 > r2max) continue;
      const double v = kernel.density(std::min(std::sqrt(r2), kernel.radius())) * vol;
      m(x, y) = v;
      row += v;
    }
    const double loop = 1.0 - row;
    if (loop < -1e-12) {
#pragma omp critical
      bad = bad < 0 ? x : std::min(bad, x);
    }
    m(x, x) = std::max(loop, 0.0);
  }
  if (bad >= 0) {
    std::ostringstream msg;
    msg << "quadrature overshoot: row " << bad << " has negative loop mass; refine the grid";
    throw SpaceError(msg.str());
  }
  return RandomWalkSpace(std::move(m), Vec::Constant(n, vol));
}

TwoStructureProblem build_two_kernel_problem(const KernelSpec& j, const KernelSpec& g,
                                             const GridDomain& grid, GrowthSpec growth1,
                                             GrowthSpec growth2) {
  return TwoStructureProblem(build_kernel_space(j, grid), build_kernel_space(g, grid), growth1, growth2);
}

}  // namespace rwflow
