#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "covspec/rng.hpp"
#include "covspec/simd/kernels.hpp"
#include "covspec/spectral.hpp"
#include "covspec/spline_basis.hpp"

namespace covspec {

/// Spectrum parameters of one time-by-covariate block:
/// log f(nu) = alpha + sum_b beta_b cos(2 pi b nu), beta ~ N(0, tau2 D).
struct BlockParams {
  double alpha = 0.0;
  std::vector<double> beta;
  double tau2 = 1.0;

  /// Stacked (alpha, beta).
  Eigen::VectorXd theta() const;
  void set_theta(const Eigen::VectorXd& theta);

  bool operator==(const BlockParams&) const = default;
};

/// Data entering one Whittle factor: the periodograms of every subject in
/// the block, all on one Fourier grid. Only their sum and count matter to
/// the likelihood, so that is what is stored. When the grid carries zero or
/// Nyquist ordinates their summed values are kept as well; those ordinates
/// are real, so they enter with half the weight of the complex ones.
class BlockData {
 public:
  /// Throws std::invalid_argument if `periodograms` is empty, grids differ,
  /// or the basis was built for a different grid length.
  BlockData(std::span<const Periodogram* const> periodograms,
            std::shared_ptr<const BasisMatrix> basis);
  BlockData(std::vector<double> periodogram_sum, std::size_t count,
            std::shared_ptr<const BasisMatrix> basis,
            std::optional<double> nyquist_sum = std::nullopt,
            FrequencyRule rule = FrequencyRule::Standard,
            std::optional<double> zero_sum = std::nullopt);

  /// A block with no observations: the posterior reduces to the prior.
  static BlockData prior_only(std::size_t num_basis);

  std::size_t num_frequencies() const { return sum_.size(); }
  std::size_t num_subjects() const { return count_; }
  std::size_t num_basis() const { return num_basis_; }
  const std::vector<double>& periodogram_sum() const { return sum_; }
  const BasisMatrix* basis() const { return basis_.get(); }
  bool has_nyquist() const { return nyquist_.has_value(); }
  double nyquist_sum() const { return nyquist_.value_or(0.0); }
  bool has_zero() const { return zero_.has_value(); }
  double zero_sum() const { return zero_.value_or(0.0); }
  FrequencyRule rule() const { return rule_; }

  simd::WhittleInput kernel_input() const;

 private:
  BlockData() = default;

  std::vector<double> sum_;
  std::size_t count_ = 0;
  std::size_t num_basis_ = 0;
  std::shared_ptr<const BasisMatrix> basis_;
  std::optional<double> nyquist_;
  std::optional<double> zero_;
  FrequencyRule rule_ = FrequencyRule::Standard;
};

/// sum_l sum_k -[logf_k + Y_lk / f_k] - c, where c is the normalizing
/// constant. Under the Standard rule c = (count * n / 2) log(2 pi), the
/// factor (2 pi)^{-n/2} per subject. Under the Complete rule each complex
/// ordinate carries two data dimensions, so c = count * n * log(2 pi), and
/// the zero and Nyquist ordinates each add
/// sum_l -[logf + Y_l / f] / 2 - (count / 2) log(2 pi) at nu = 0 and 1/2
/// (the log density of a real Gaussian ordinate). The constant
/// is kept because n changes with the segment length, so it does not cancel
/// in between-model ratios.
double block_log_whittle(const BlockParams& params, const BlockData& data);
double block_log_whittle(const Eigen::VectorXd& theta, const BlockData& data);

/// log N(alpha | 0, sigma2_alpha) + log N(beta | 0, tau2 D), normalized.
double log_coefficient_prior(const Eigen::VectorXd& theta, double tau2, double sigma2_alpha);

/// block_log_whittle + log_coefficient_prior. Relative to the unnormalized
/// single-subject form
///   -sum_k [alpha + z_k'beta + exp(log Y_k - alpha - z_k'beta)]
///     - alpha^2 / (2 sigma2_alpha) - beta' D^-1 beta / (2 tau2)
/// this differs by conditional_posterior_offset(), which is constant in
/// (alpha, beta). Throws std::invalid_argument for tau2 <= 0.
double log_conditional_posterior(const BlockParams& params, const BlockData& data,
                                 double sigma2_alpha);
double log_conditional_posterior(const Eigen::VectorXd& theta, double tau2, const BlockData& data,
                                 double sigma2_alpha);

double conditional_posterior_offset(const BlockData& data, double tau2, double sigma2_alpha);

struct GradHessian {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Analytic gradient and Hessian of log_conditional_posterior in (alpha, beta).
GradHessian grad_hessian(const Eigen::VectorXd& theta, double tau2, const BlockData& data,
                         double sigma2_alpha);
GradHessian grad_hessian(const BlockParams& params, const BlockData& data, double sigma2_alpha);

/// Gaussian N(mode, precision^-1), held through the Cholesky factor of the
/// precision.
class GaussianApprox {
 public:
  /// Returns nullopt when the precision is not positive definite even after
  /// adding 1e-10 to its diagonal.
  static std::optional<GaussianApprox> from_precision(Eigen::VectorXd mode,
                                                      const Eigen::MatrixXd& precision);

  const Eigen::VectorXd& mode() const { return mode_; }
  Eigen::MatrixXd covariance() const;
  const Eigen::MatrixXd& precision() const { return precision_; }

  double log_density(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd sample(Rng& rng) const;

 private:
  Eigen::VectorXd mode_;
  Eigen::MatrixXd precision_;
  Eigen::MatrixXd chol_lower_;  // precision = L L'
  double log_norm_ = 0.0;
};

enum class LaplaceStatus { Converged, MaxIterations, LineSearchFailed, NonFinite, NotPositiveDefinite };

struct LaplaceSettings {
  double gradient_tolerance = 1e-6;
  int max_iterations = 100;
  int max_halvings = 40;
};

struct LaplaceResult {
  LaplaceStatus status = LaplaceStatus::NonFinite;
  int iterations = 0;
  std::optional<GaussianApprox> approx;

  bool ok() const { return status == LaplaceStatus::Converged && approx.has_value(); }
};

/// Newton ascent on log_conditional_posterior from `init` with step halving,
/// stopping when the gradient's max-norm drops below the tolerance. The
/// returned Gaussian is centred at the mode with covariance equal to the
/// inverse negative Hessian there. Failures are reported through `status`
/// so that the caller can reject the move.
LaplaceResult laplace_approx(const BlockData& data, double tau2, double sigma2_alpha,
                             const Eigen::VectorXd& init, const LaplaceSettings& settings = {});

/// Deterministic Newton start that depends only on the block data: alpha at
/// the log of the mean periodogram, beta at zero. Using it makes the Laplace approximation a function of
/// (data, tau2) alone.
Eigen::VectorXd default_laplace_start(const BlockData& data);

/// Which conditional density the smoothing-parameter update draws from.
///  - Uniform: (tau2)^{-B/2} exp(-q / (2 tau2)), i.e. IG(B/2 - 1, q/2); this
///    is the full conditional under a flat prior on tau2.
///  - Reciprocal: (tau2)^{-B/2-1} exp(...), i.e. IG(B/2, q/2), the full
///    conditional under p(tau2) = 1/tau2.
enum class Tau2Prior { Uniform, Reciprocal };

/// Draws tau2 given beta. q = beta' D^-1 beta is floored at 1e-12 (so beta = 0
/// still yields a draw). When tau2_max is finite the draw is from the
/// inverse gamma truncated to (0, tau2_max], by inverting the CDF.
/// Throws std::invalid_argument if the shape would be non-positive
/// (B < 3 for the Uniform form).
double gibbs_tau2(std::span<const double> beta, const PenaltyMatrix& penalty, Rng& rng,
                  Tau2Prior prior = Tau2Prior::Uniform,
                  double tau2_max = std::numeric_limits<double>::infinity());

/// Shape and scale of the inverse gamma that gibbs_tau2 samples.
struct InverseGammaParams {
  double shape;
  double scale;
};
InverseGammaParams tau2_conditional(std::span<const double> beta, const PenaltyMatrix& penalty,
                                    Tau2Prior prior);

/// Log prior density of tau2: uniform on (0, tau2_max] (-log tau2_max), or
/// 1/tau2 restricted to (0, tau2_max]. Outside the support: -inf.
double log_tau2_prior(double tau2, Tau2Prior prior, double tau2_max);

}  // namespace covspec
