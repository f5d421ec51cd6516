// AVX2 + FMA kernels, four frequencies per lane group. Compiled with
// -mavx2 -mfma; only reached when CPUID reports both extensions.
//
// exp() is evaluated in-register: n = round(x / ln2), r = x - n ln2 split
// into hi/lo parts (|r| <= ln2 / 2), a degree-13 Taylor polynomial for e^r,
// then scaling by 2^n through the exponent bits. Arguments are clamped to
// [-708, 708], so results stay finite where std::exp would overflow.

#include <immintrin.h>

#include <cmath>

#include "covspec/simd/kernels.hpp"

namespace covspec::simd::avx2 {

namespace {

constexpr std::size_t kMaxDim = 16;

inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-708.0)), _mm256_set1_pd(708.0));

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  // Horner on sum_{k=0}^{13} r^k / k!.
  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // n is integral and |n| < 2^51: adding 2^52 + 2^51 leaves it in the low
  // mantissa bits, from which the biased exponent is built.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);
  __m256i bits = _mm256_castpd_si256(_mm256_add_pd(n, magic));
  bits = _mm256_sub_epi64(bits, _mm256_castpd_si256(magic));
  bits = _mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d logf_at(const double* basis, std::size_t stride, std::size_t num_basis,
                       const double* theta, std::size_t k) {
  __m256d acc = _mm256_set1_pd(theta[0]);
  for (std::size_t b = 0; b < num_basis; ++b) {
    acc = _mm256_fmadd_pd(_mm256_set1_pd(theta[b + 1]), _mm256_loadu_pd(basis + b * stride + k),
                          acc);
  }
  return acc;
}

}  // namespace

double exp_approx(double x) {
  double out[4];
  _mm256_storeu_pd(out, exp_pd(_mm256_set1_pd(x)));
  return out[0];
}

void linear_predictor(const double* basis, std::size_t rows, std::size_t stride,
                      std::size_t num_basis, const double* theta, double* out) {
  const std::size_t body = rows & ~std::size_t{3};
  for (std::size_t k = 0; k < body; k += 4) {
    _mm256_storeu_pd(out + k, logf_at(basis, stride, num_basis, theta, k));
  }
  for (std::size_t k = body; k < rows; ++k) {
    double v = theta[0];
    for (std::size_t b = 0; b < num_basis; ++b) v += theta[b + 1] * basis[b * stride + k];
    out[k] = v;
  }
}

double whittle_value(const WhittleInput& in, const double* theta) {
  const std::size_t body = in.rows & ~std::size_t{3};
  const __m256d count = _mm256_set1_pd(in.count);
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t k = 0; k < body; k += 4) {
    const __m256d logf = logf_at(in.basis, in.stride, in.num_basis, theta, k);
    const __m256d w = _mm256_mul_pd(_mm256_loadu_pd(in.periodogram_sum + k),
                                    exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), logf)));
    acc = _mm256_add_pd(acc, _mm256_fmadd_pd(count, logf, w));
  }
  double total = hsum(acc);
  for (std::size_t k = body; k < in.rows; ++k) {
    double logf = theta[0];
    for (std::size_t b = 0; b < in.num_basis; ++b) logf += theta[b + 1] * in.basis[b * in.stride + k];
    total += in.count * logf + in.periodogram_sum[k] * std::exp(-logf);
  }
  return -total;
}

double whittle_derivatives(const WhittleInput& in, const double* theta, double* grad,
                           double* hess) {
  const std::size_t dim = in.num_basis + 1;
  if (dim > kMaxDim) return scalar::whittle_derivatives(in, theta, grad, hess);

  __m256d g_acc[kMaxDim];
  __m256d h_acc[kMaxDim * (kMaxDim + 1) / 2];
  const std::size_t tri = dim * (dim + 1) / 2;
  for (std::size_t i = 0; i < dim; ++i) g_acc[i] = _mm256_setzero_pd();
  for (std::size_t i = 0; i < tri; ++i) h_acc[i] = _mm256_setzero_pd();
  __m256d v_acc = _mm256_setzero_pd();
  const __m256d count = _mm256_set1_pd(in.count);

  const std::size_t body = in.rows & ~std::size_t{3};
  __m256d x[kMaxDim];
  x[0] = _mm256_set1_pd(1.0);
  for (std::size_t k = 0; k < body; k += 4) {
    __m256d logf = _mm256_set1_pd(theta[0]);
    for (std::size_t b = 0; b < in.num_basis; ++b) {
      x[b + 1] = _mm256_loadu_pd(in.basis + b * in.stride + k);
      logf = _mm256_fmadd_pd(_mm256_set1_pd(theta[b + 1]), x[b + 1], logf);
    }
    const __m256d w = _mm256_mul_pd(_mm256_loadu_pd(in.periodogram_sum + k),
                                    exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), logf)));
    v_acc = _mm256_add_pd(v_acc, _mm256_fmadd_pd(count, logf, w));
    const __m256d resid = _mm256_sub_pd(count, w);
    std::size_t t = 0;
    for (std::size_t a = 0; a < dim; ++a) {
      g_acc[a] = _mm256_fmadd_pd(x[a], resid, g_acc[a]);
      const __m256d xw = _mm256_mul_pd(x[a], w);
      for (std::size_t c = a; c < dim; ++c, ++t) h_acc[t] = _mm256_fmadd_pd(xw, x[c], h_acc[t]);
    }
  }

  double total = hsum(v_acc);
  for (std::size_t a = 0; a < dim; ++a) grad[a] = -hsum(g_acc[a]);
  {
    std::size_t t = 0;
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t c = a; c < dim; ++c, ++t) hess[a * dim + c] = -hsum(h_acc[t]);
    }
  }

  double xs[kMaxDim];
  xs[0] = 1.0;
  for (std::size_t k = body; k < in.rows; ++k) {
    double logf = theta[0];
    for (std::size_t b = 0; b < in.num_basis; ++b) {
      xs[b + 1] = in.basis[b * in.stride + k];
      logf += theta[b + 1] * xs[b + 1];
    }
    const double w = in.periodogram_sum[k] * std::exp(-logf);
    total += in.count * logf + w;
    const double resid = in.count - w;
    for (std::size_t a = 0; a < dim; ++a) {
      grad[a] -= xs[a] * resid;
      for (std::size_t c = a; c < dim; ++c) hess[a * dim + c] -= xs[a] * xs[c] * w;
    }
  }
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t c = 0; c < a; ++c) hess[a * dim + c] = hess[c * dim + a];
  }
  return -total;
}

}  // namespace covspec::simd::avx2
