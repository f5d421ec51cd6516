#pragma once

// Inner loops of the Whittle block posterior, in a scalar reference form and
// an AVX2/FMA form. The active variant is chosen once at startup from CPUID
// and can be pinned with set_isa() or the COVSPEC_ISA environment variable
// ("scalar" or "avx2").

#include <cstddef>
#include <string_view>

namespace covspec::simd {

enum class Isa { Scalar, Avx2 };

/// Column-major cosine basis plus summed periodogram for one block.
/// `basis` holds `num_basis` columns of `stride` doubles; only the first
/// `rows` entries of each column are read.
struct WhittleInput {
  const double* basis = nullptr;
  std::size_t rows = 0;
  std::size_t stride = 0;
  std::size_t num_basis = 0;
  const double* periodogram_sum = nullptr;  // sum over subjects of Y_l(nu_k)
  double count = 0.0;                       // number of subjects in the block
};

// Every variant exposes the same three kernels. theta = (alpha, beta_1..B).
//
//   linear_predictor:    out[k] = alpha + sum_b beta_b Z[k][b]
//   whittle_value:       -sum_k [count * logf_k + S_k exp(-logf_k)]
//   whittle_derivatives: the value above, its gradient in theta (length
//                        B+1) and Hessian ((B+1)^2, row-major, symmetric).
#define COVSPEC_DECLARE_KERNELS(ns)                                                       \
  namespace ns {                                                                          \
  void linear_predictor(const double* basis, std::size_t rows, std::size_t stride,        \
                        std::size_t num_basis, const double* theta, double* out);         \
  double whittle_value(const WhittleInput& in, const double* theta);                      \
  double whittle_derivatives(const WhittleInput& in, const double* theta, double* grad,   \
                             double* hess);                                               \
  double exp_approx(double x);                                                            \
  }

COVSPEC_DECLARE_KERNELS(scalar)
COVSPEC_DECLARE_KERNELS(avx2)

#undef COVSPEC_DECLARE_KERNELS

bool cpu_supports(Isa isa);
bool compiled_with(Isa isa);

/// Best variant the CPU and build support.
Isa detected_isa();
Isa active_isa();
/// Throws std::invalid_argument if the variant is not available.
void set_isa(Isa isa);

std::string_view isa_name(Isa isa);
/// Parses "scalar", "avx2" or "auto".
Isa parse_isa(std::string_view name);

// Dispatching entry points.
void linear_predictor(const double* basis, std::size_t rows, std::size_t stride,
                      std::size_t num_basis, const double* theta, double* out);
double whittle_value(const WhittleInput& in, const double* theta);
double whittle_derivatives(const WhittleInput& in, const double* theta, double* grad,
                           double* hess);

}  // namespace covspec::simd
