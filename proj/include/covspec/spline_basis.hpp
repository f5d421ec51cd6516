#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "covspec/spectral.hpp"

namespace covspec {

/// Cosine (Demmler-Reinsch) basis cos(2 pi b nu_k), b = 1..B, evaluated on a
/// Fourier grid.
///
/// Stored column-major with each column padded to a multiple of four doubles
/// (padding entries are zero), which is the layout the SIMD kernels consume.
class BasisMatrix {
 public:
  BasisMatrix() = default;
  BasisMatrix(const FourierGrid& grid, std::size_t num_basis);
  /// Basis on arbitrary frequencies (used when rendering surfaces).
  BasisMatrix(std::span<const double> frequencies, std::size_t num_basis);

  std::size_t rows() const { return rows_; }
  std::size_t num_basis() const { return num_basis_; }
  std::size_t stride() const { return stride_; }

  double operator()(std::size_t k, std::size_t b) const { return data_[b * stride_ + k]; }
  /// Column b (0-based, i.e. harmonic b + 1), `stride()` long.
  const double* column(std::size_t b) const { return data_.data() + b * stride_; }

 private:
  std::size_t rows_ = 0;
  std::size_t num_basis_ = 0;
  std::size_t stride_ = 0;
  std::vector<double> data_;
};

/// Prior scale diag((2 pi b)^-2), b = 1..B.
class PenaltyMatrix {
 public:
  explicit PenaltyMatrix(std::size_t num_basis);

  std::size_t size() const { return diag_.size(); }
  double diagonal(std::size_t b) const { return diag_[b]; }
  /// Entry b of D^-1, i.e. (2 pi (b+1))^2; taken analytically.
  double inverse_diagonal(std::size_t b) const { return inv_diag_[b]; }
  /// beta' D^-1 beta.
  double quadratic_form(std::span<const double> beta) const;
  /// log det D.
  double log_determinant() const { return log_det_; }

 private:
  std::vector<double> diag_;
  std::vector<double> inv_diag_;
  double log_det_ = 0.0;
};

/// Throws std::invalid_argument for B < 1.
BasisMatrix build_basis(const FourierGrid& grid, std::size_t num_basis);

/// alpha + sum_b beta_b cos(2 pi b nu) at each frequency.
std::vector<double> log_spectrum_eval(double alpha, std::span<const double> beta,
                                      std::span<const double> frequencies);

}  // namespace covspec

namespace covspec {

/// alpha + Z beta on the basis rows; throws std::invalid_argument when
/// beta.size() differs from the basis width.
std::vector<double> log_spectrum_eval(double alpha, std::span<const double> beta,
                                      const BasisMatrix& basis);

}  // namespace covspec
