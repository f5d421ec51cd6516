#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "covspec/simd/kernels.hpp"

namespace covspec::simd {

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("COVSPEC_ISA")) {
    const Isa requested = parse_isa(env);
    if (cpu_supports(requested) && compiled_with(requested)) return requested;
  }
  return detected_isa();
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

bool compiled_with(Isa isa) {
  if (isa == Isa::Scalar) return true;
#ifdef COVSPEC_HAVE_AVX2
  return true;
#else
  return false;
#endif
}

bool cpu_supports(Isa isa) {
  if (isa == Isa::Scalar) return true;
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detected_isa() {
  return (compiled_with(Isa::Avx2) && cpu_supports(Isa::Avx2)) ? Isa::Avx2 : Isa::Scalar;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!compiled_with(isa) || !cpu_supports(isa)) {
    throw std::invalid_argument("kernel variant '" + std::string(isa_name(isa)) +
                                "' is not available on this build or CPU");
  }
  active().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  if (name == "auto") return detected_isa();
  throw std::invalid_argument("unknown kernel variant '" + std::string(name) + "'");
}

void linear_predictor(const double* basis, std::size_t rows, std::size_t stride,
                      std::size_t num_basis, const double* theta, double* out) {
#ifdef COVSPEC_HAVE_AVX2
  if (active_isa() == Isa::Avx2) return avx2::linear_predictor(basis, rows, stride, num_basis, theta, out);
#endif
  scalar::linear_predictor(basis, rows, stride, num_basis, theta, out);
}

double whittle_value(const WhittleInput& in, const double* theta) {
#ifdef COVSPEC_HAVE_AVX2
  if (active_isa() == Isa::Avx2) return avx2::whittle_value(in, theta);
#endif
  return scalar::whittle_value(in, theta);
}

double whittle_derivatives(const WhittleInput& in, const double* theta, double* grad,
                           double* hess) {
#ifdef COVSPEC_HAVE_AVX2
  if (active_isa() == Isa::Avx2) return avx2::whittle_derivatives(in, theta, grad, hess);
#endif
  return scalar::whittle_derivatives(in, theta, grad, hess);
}

}  // namespace covspec::simd
