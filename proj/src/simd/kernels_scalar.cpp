// Reference kernels. Plain loops in natural summation order; the AVX2
// variants are tested against these.

#include <cmath>
#include <vector>

#include "covspec/simd/kernels.hpp"

namespace covspec::simd::scalar {

double exp_approx(double x) { return std::exp(x); }

void linear_predictor(const double* basis, std::size_t rows, std::size_t stride,
                      std::size_t num_basis, const double* theta, double* out) {
  for (std::size_t k = 0; k < rows; ++k) out[k] = theta[0];
  for (std::size_t b = 0; b < num_basis; ++b) {
    const double* col = basis + b * stride;
    const double coef = theta[b + 1];
    for (std::size_t k = 0; k < rows; ++k) out[k] += coef * col[k];
  }
}

double whittle_value(const WhittleInput& in, const double* theta) {
  double total = 0.0;
  for (std::size_t k = 0; k < in.rows; ++k) {
    double logf = theta[0];
    for (std::size_t b = 0; b < in.num_basis; ++b) logf += theta[b + 1] * in.basis[b * in.stride + k];
    total += in.count * logf + in.periodogram_sum[k] * std::exp(-logf);
  }
  return -total;
}

double whittle_derivatives(const WhittleInput& in, const double* theta, double* grad,
                           double* hess) {
  const std::size_t dim = in.num_basis + 1;
  for (std::size_t i = 0; i < dim; ++i) grad[i] = 0.0;
  for (std::size_t i = 0; i < dim * dim; ++i) hess[i] = 0.0;
  std::vector<double> x(dim);
  x[0] = 1.0;
  double total = 0.0;
  for (std::size_t k = 0; k < in.rows; ++k) {
    double logf = theta[0];
    for (std::size_t b = 0; b < in.num_basis; ++b) {
      x[b + 1] = in.basis[b * in.stride + k];
      logf += theta[b + 1] * x[b + 1];
    }
    const double w = in.periodogram_sum[k] * std::exp(-logf);
    total += in.count * logf + w;
    const double resid = in.count - w;
    for (std::size_t a = 0; a < dim; ++a) {
      grad[a] -= x[a] * resid;
      for (std::size_t c = a; c < dim; ++c) hess[a * dim + c] -= x[a] * x[c] * w;
    }
  }
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t c = 0; c < a; ++c) hess[a * dim + c] = hess[c * dim + a];
  }
  return -total;
}

}  // namespace covspec::simd::scalar
