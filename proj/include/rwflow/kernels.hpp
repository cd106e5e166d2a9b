#pragma once

// Edge-parallel kernels shared by the energy, certificate and prox code.
//
// Every kernel exists twice: a serial reference and an OpenMP version. The
// OpenMP versions perform the same floating point operations in the same
// order per output entry (vertex sums gather over a fixed incidence list), so
// both back ends produce bitwise identical results.

#include <cstdint>
#include <span>
#include <vector>

namespace rwflow {

/// One summand W * |u(head) - u(tail)|^p / p of an energy (p = 1 is total variation).
struct EnergyTerm {
  int tail = 0;
  int head = 0;
  double weight = 0.0;
  double p = 1.0;
  int structure = 0;
};

namespace kernels {

/// Vertex-to-term incidence in CSR form. sign is +1 when the vertex is the
/// tail of the term and -1 when it is the head.
struct Incidence {
  std::vector<int> offsets;
  std::vector<int> term;
  std::vector<std::int8_t> sign;

  static Incidence build(int vertices, std::span<const EnergyTerm> terms);
};

enum class Backend { Serial, OpenMP };

/// Work size below which the OpenMP back end runs on one thread.
inline constexpr int kParallelThreshold = 2048;

struct PdhgSteps {
  std::vector<double> tau;    // per vertex
  std::vector<double> sigma;  // per term
};

PdhgSteps pdhg_steps(int vertices, std::span<const EnergyTerm> terms, const Incidence& inc);

namespace serial {
void differences(std::span<const EnergyTerm> terms, std::span<const double> u, std::span<double> d);
/// out(x) = sum over incident terms of sign * W * z.
void flux_sum(std::span<const EnergyTerm> terms, const Incidence& inc, std::span<const double> z,
              std::span<double> out);
void term_energies(std::span<const EnergyTerm> terms, std::span<const double> u, std::span<double> e);
void pdhg_primal(const Incidence& inc, std::span<const EnergyTerm> terms, const PdhgSteps& steps,
                 std::span<const double> metric, std::span<const double> v, double lambda,
                 std::span<const double> y, std::span<double> u, std::span<double> u_bar);
void pdhg_dual(std::span<const EnergyTerm> terms, const PdhgSteps& steps,
               std::span<const double> u_bar, std::span<double> y);
}  // namespace serial

namespace omp {
void differences(std::span<const EnergyTerm> terms, std::span<const double> u, std::span<double> d);
void flux_sum(std::span<const EnergyTerm> terms, const Incidence& inc, std::span<const double> z,
              std::span<double> out);
void term_energies(std::span<const EnergyTerm> terms, std::span<const double> u, std::span<double> e);
void pdhg_primal(const Incidence& inc, std::span<const EnergyTerm> terms, const PdhgSteps& steps,
                 std::span<const double> metric, std::span<const double> v, double lambda,
                 std::span<const double> y, std::span<double> u, std::span<double> u_bar);
void pdhg_dual(std::span<const EnergyTerm> terms, const PdhgSteps& steps,
               std::span<const double> u_bar, std::span<double> y);
}  // namespace omp

/// |d|^p / p, with p = 1 giving |d|.
double growth_value(double d, double p);
/// |d|^(p-2) d for p > 1, sign(d) for p = 1 (0 at 0).
double growth_flux(double d, double p);
/// Proximal map of c * |y|^q / q at point y0 (q > 1).
double prox_power(double y0, double c, double q);

}  // namespace kernels
}  // namespace rwflow
