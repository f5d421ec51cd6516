#include "covspec/spline_basis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <algorithm>

namespace covspec {

BasisMatrix::BasisMatrix(std::span<const double> frequencies, std::size_t num_basis)
    : rows_(frequencies.size()), num_basis_(num_basis), stride_((frequencies.size() + 3) & ~3ULL) {
  if (num_basis < 1) throw std::invalid_argument("basis needs at least one function");
  data_.assign(stride_ * num_basis_, 0.0);
  for (std::size_t b = 0; b < num_basis_; ++b) {
    const double harmonic = 2.0 * std::numbers::pi * static_cast<double>(b + 1);
    for (std::size_t k = 0; k < rows_; ++k) {
      data_[b * stride_ + k] = std::cos(harmonic * frequencies[k]);
    }
  }
}

BasisMatrix::BasisMatrix(const FourierGrid& grid, std::size_t num_basis)
    : BasisMatrix(std::span<const double>(grid.frequencies), num_basis) {}

PenaltyMatrix::PenaltyMatrix(std::size_t num_basis) {
  if (num_basis < 1) throw std::invalid_argument("penalty needs at least one basis function");
  diag_.resize(num_basis);
  inv_diag_.resize(num_basis);
  for (std::size_t b = 0; b < num_basis; ++b) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(b + 1);
    inv_diag_[b] = w * w;
    diag_[b] = 1.0 / (w * w);
    log_det_ -= 2.0 * std::log(w);
  }
}

double PenaltyMatrix::quadratic_form(std::span<const double> beta) const {
  if (beta.size() != diag_.size()) throw std::invalid_argument("quadratic_form: size mismatch");
  double q = 0.0;
  for (std::size_t b = 0; b < beta.size(); ++b) q += beta[b] * beta[b] * inv_diag_[b];
  return q;
}

BasisMatrix build_basis(const FourierGrid& grid, std::size_t num_basis) {
  return BasisMatrix(grid, num_basis);
}

std::vector<double> log_spectrum_eval(double alpha, std::span<const double> beta,
                                      std::span<const double> frequencies) {
  std::vector<double> out(frequencies.size(), alpha);
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    for (std::size_t b = 0; b < beta.size(); ++b) {
      out[k] += beta[b] * std::cos(2.0 * std::numbers::pi * static_cast<double>(b + 1) *
                                   frequencies[k]);
    }
  }
  return out;
}

}  // namespace covspec

#include "covspec/simd/kernels.hpp"

namespace covspec {

std::vector<double> log_spectrum_eval(double alpha, std::span<const double> beta,
                                      const BasisMatrix& basis) {
  if (beta.size() != basis.num_basis()) {
    throw std::invalid_argument("log_spectrum_eval: beta has " + std::to_string(beta.size()) +
                                " entries, basis has " + std::to_string(basis.num_basis()));
  }
  std::vector<double> theta(beta.size() + 1);
  theta[0] = alpha;
  std::copy(beta.begin(), beta.end(), theta.begin() + 1);
  std::vector<double> out(basis.rows());
  if (basis.rows() > 0) {
    simd::linear_predictor(basis.column(0), basis.rows(), basis.stride(), basis.num_basis(),
                           theta.data(), out.data());
  }
  return out;
}

}  // namespace covspec
