#include "covspec/whittle.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace covspec {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)
constexpr double kLogPeriodogramBias = 0.57722;   // Euler-Mascheroni

void check_tau2(double tau2) {
  if (!(tau2 > 0.0) || !std::isfinite(tau2)) {
    throw std::invalid_argument("tau2 must be positive and finite, got " + std::to_string(tau2));
  }
}

void check_theta(const Eigen::VectorXd& theta, const BlockData& data) {
  if (static_cast<std::size_t>(theta.size()) != data.num_basis() + 1) {
    throw std::invalid_argument("coefficient vector has length " + std::to_string(theta.size()) +
                                ", expected " + std::to_string(data.num_basis() + 1));
  }
}

// Counts real data dimensions at 1/2 log(2 pi) each; the Standard rule
// counts one per complex ordinate.
double whittle_constant(const BlockData& data) {
  const double n = static_cast<double>(data.num_frequencies());
  const double dims = data.rule() == FrequencyRule::Standard
                          ? n
                          : 2.0 * n + (data.has_nyquist() ? 1.0 : 0.0) +
                                (data.has_zero() ? 1.0 : 0.0);
  return -0.5 * static_cast<double>(data.num_subjects()) * dims * kLog2Pi;
}

// Basis value of coefficient a at nu = 0 (all ones) or nu = 1/2 ((-1)^a).
double edge_basis(Eigen::Index a, bool nyquist) {
  return nyquist && a % 2 == 1 ? -1.0 : 1.0;
}

double edge_log_spectrum(const Eigen::VectorXd& theta, bool nyquist) {
  double lf = 0.0;
  for (Eigen::Index a = 0; a < theta.size(); ++a) lf += edge_basis(a, nyquist) * theta[a];
  return lf;
}

double edge_value(const Eigen::VectorXd& theta, double count, double sum, bool nyquist) {
  const double lf = edge_log_spectrum(theta, nyquist);
  return -0.5 * (count * lf + sum * std::exp(-lf));
}

void edge_derivatives(const Eigen::VectorXd& theta, double count, double sum, bool nyquist,
                      GradHessian& out) {
  const double scaled = sum * std::exp(-edge_log_spectrum(theta, nyquist));
  for (Eigen::Index a = 0; a < theta.size(); ++a) {
    const double za = edge_basis(a, nyquist);
    out.gradient[a] -= 0.5 * (count - scaled) * za;
    for (Eigen::Index b = 0; b < theta.size(); ++b) {
      out.hessian(a, b) -= 0.5 * scaled * za * edge_basis(b, nyquist);
    }
  }
}

// Half-weight terms of the real ordinates at nu = 0 and 1/2.
double edge_terms(const Eigen::VectorXd& theta, const BlockData& data) {
  const double count = static_cast<double>(data.num_subjects());
  double v = 0.0;
  if (data.has_zero()) v += edge_value(theta, count, data.zero_sum(), false);
  if (data.has_nyquist()) v += edge_value(theta, count, data.nyquist_sum(), true);
  return v;
}

}  // namespace

// ----------------------------------------------------------------- BlockParams

Eigen::VectorXd BlockParams::theta() const {
  Eigen::VectorXd t(static_cast<Eigen::Index>(beta.size() + 1));
  t[0] = alpha;
  for (std::size_t b = 0; b < beta.size(); ++b) t[static_cast<Eigen::Index>(b + 1)] = beta[b];
  return t;
}

void BlockParams::set_theta(const Eigen::VectorXd& theta) {
  alpha = theta[0];
  beta.assign(theta.data() + 1, theta.data() + theta.size());
}

// ------------------------------------------------------------------- BlockData

BlockData::BlockData(std::span<const Periodogram* const> periodograms,
                     std::shared_ptr<const BasisMatrix> basis)
    : count_(periodograms.size()), basis_(std::move(basis)) {
  if (periodograms.empty()) throw std::invalid_argument("BlockData: no periodograms");
  if (!basis_) throw std::invalid_argument("BlockData: missing basis");
  const FourierGrid& grid = periodograms.front()->grid;
  sum_.assign(grid.n, 0.0);
  double nyquist = 0.0;
  double zero = 0.0;
  for (const Periodogram* pg : periodograms) {
    if (!(pg->grid == grid)) throw std::invalid_argument("BlockData: periodograms on different grids");
    for (std::size_t k = 0; k < grid.n; ++k) sum_[k] += pg->values[k];
    nyquist += pg->nyquist_value;
    zero += pg->zero_value;
  }
  if (grid.nyquist) nyquist_ = nyquist;
  if (grid.zero) zero_ = zero;
  rule_ = grid.rule;
  if (basis_->rows() != grid.n) throw std::invalid_argument("BlockData: basis/grid mismatch");
  num_basis_ = basis_->num_basis();
}

BlockData::BlockData(std::vector<double> periodogram_sum, std::size_t count,
                     std::shared_ptr<const BasisMatrix> basis, std::optional<double> nyquist_sum,
                     FrequencyRule rule, std::optional<double> zero_sum)
    : sum_(std::move(periodogram_sum)),
      count_(count),
      basis_(std::move(basis)),
      nyquist_(nyquist_sum),
      zero_(zero_sum),
      rule_(rule) {
  if ((nyquist_ || zero_) && rule_ == FrequencyRule::Standard) {
    throw std::invalid_argument("BlockData: the Standard rule has no zero or Nyquist ordinate");
  }
  if (count_ == 0) throw std::invalid_argument("BlockData: no subjects");
  if (!basis_ || basis_->rows() != sum_.size()) {
    throw std::invalid_argument("BlockData: basis/grid mismatch");
  }
  num_basis_ = basis_->num_basis();
}

BlockData BlockData::prior_only(std::size_t num_basis) {
  BlockData d;
  d.num_basis_ = num_basis;
  return d;
}

simd::WhittleInput BlockData::kernel_input() const {
  simd::WhittleInput in;
  if (basis_) {
    in.basis = basis_->column(0);
    in.stride = basis_->stride();
  }
  in.rows = sum_.size();
  in.num_basis = num_basis_;
  in.periodogram_sum = sum_.data();
  in.count = static_cast<double>(count_);
  return in;
}

// ---------------------------------------------------------------- log densities

double block_log_whittle(const Eigen::VectorXd& theta, const BlockData& data) {
  check_theta(theta, data);
  if (data.num_subjects() == 0) return 0.0;
  return simd::whittle_value(data.kernel_input(), theta.data()) + edge_terms(theta, data) +
         whittle_constant(data);
}

double block_log_whittle(const BlockParams& params, const BlockData& data) {
  return block_log_whittle(params.theta(), data);
}

double log_coefficient_prior(const Eigen::VectorXd& theta, double tau2, double sigma2_alpha) {
  check_tau2(tau2);
  const std::size_t num_basis = static_cast<std::size_t>(theta.size()) - 1;
  const PenaltyMatrix penalty(num_basis);
  double quad = 0.0;
  for (std::size_t b = 0; b < num_basis; ++b) {
    const double beta = theta[static_cast<Eigen::Index>(b + 1)];
    quad += beta * beta * penalty.inverse_diagonal(b);
  }
  const double alpha = theta[0];
  return -0.5 * (kLog2Pi + std::log(sigma2_alpha)) - 0.5 * alpha * alpha / sigma2_alpha -
         0.5 * static_cast<double>(num_basis) * (kLog2Pi + std::log(tau2)) -
         0.5 * penalty.log_determinant() - 0.5 * quad / tau2;
}

double log_conditional_posterior(const Eigen::VectorXd& theta, double tau2, const BlockData& data,
                                 double sigma2_alpha) {
  check_tau2(tau2);
  if (!(sigma2_alpha > 0.0)) throw std::invalid_argument("sigma2_alpha must be positive");
  return block_log_whittle(theta, data) + log_coefficient_prior(theta, tau2, sigma2_alpha);
}

double log_conditional_posterior(const BlockParams& params, const BlockData& data,
                                 double sigma2_alpha) {
  return log_conditional_posterior(params.theta(), params.tau2, data, sigma2_alpha);
}

double conditional_posterior_offset(const BlockData& data, double tau2, double sigma2_alpha) {
  const PenaltyMatrix penalty(data.num_basis());
  return whittle_constant(data) - 0.5 * (kLog2Pi + std::log(sigma2_alpha)) -
         0.5 * static_cast<double>(data.num_basis()) * (kLog2Pi + std::log(tau2)) -
         0.5 * penalty.log_determinant();
}

GradHessian grad_hessian(const Eigen::VectorXd& theta, double tau2, const BlockData& data,
                         double sigma2_alpha) {
  check_theta(theta, data);
  check_tau2(tau2);
  const Eigen::Index dim = theta.size();
  GradHessian out;
  out.gradient = Eigen::VectorXd::Zero(dim);
  out.hessian = Eigen::MatrixXd::Zero(dim, dim);
  double value = 0.0;
  if (data.num_subjects() > 0) {
    // Eigen matrices are column-major; the kernel writes a symmetric matrix,
    // so the layout does not matter.
    value = simd::whittle_derivatives(data.kernel_input(), theta.data(), out.gradient.data(),
                                      out.hessian.data()) +
            edge_terms(theta, data) + whittle_constant(data);
    const double count = static_cast<double>(data.num_subjects());
    if (data.has_zero()) edge_derivatives(theta, count, data.zero_sum(), false, out);
    if (data.has_nyquist()) edge_derivatives(theta, count, data.nyquist_sum(), true, out);
  }
  const PenaltyMatrix penalty(data.num_basis());
  out.gradient[0] -= theta[0] / sigma2_alpha;
  out.hessian(0, 0) -= 1.0 / sigma2_alpha;
  for (std::size_t b = 0; b < data.num_basis(); ++b) {
    const auto i = static_cast<Eigen::Index>(b + 1);
    const double prec = penalty.inverse_diagonal(b) / tau2;
    out.gradient[i] -= prec * theta[i];
    out.hessian(i, i) -= prec;
  }
  out.value = value + log_coefficient_prior(theta, tau2, sigma2_alpha);
  return out;
}

GradHessian grad_hessian(const BlockParams& params, const BlockData& data, double sigma2_alpha) {
  return grad_hessian(params.theta(), params.tau2, data, sigma2_alpha);
}

// -------------------------------------------------------------- GaussianApprox

std::optional<GaussianApprox> GaussianApprox::from_precision(Eigen::VectorXd mode,
                                                             const Eigen::MatrixXd& precision) {
  GaussianApprox g;
  g.mode_ = std::move(mode);
  g.precision_ = precision;
  Eigen::LLT<Eigen::MatrixXd> llt(g.precision_);
  if (llt.info() != Eigen::Success) {
    g.precision_.diagonal().array() += 1e-10;
    llt.compute(g.precision_);
    if (llt.info() != Eigen::Success) return std::nullopt;
  }
  g.chol_lower_ = llt.matrixL();
  const Eigen::Index dim = g.mode_.size();
  double log_det_l = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double d = g.chol_lower_(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    log_det_l += std::log(d);
  }
  g.log_norm_ = -0.5 * static_cast<double>(dim) * kLog2Pi + log_det_l;
  return g;
}

Eigen::MatrixXd GaussianApprox::covariance() const {
  const Eigen::Index dim = mode_.size();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(dim, dim);
  const auto lower = chol_lower_.triangularView<Eigen::Lower>();
  lower.solveInPlace(inv);
  lower.transpose().solveInPlace(inv);
  return 0.5 * (inv + inv.transpose());
}

double GaussianApprox::log_density(const Eigen::VectorXd& theta) const {
  // |L' (theta - mode)|^2 is the Mahalanobis distance under precision L L'.
  const Eigen::VectorXd z = chol_lower_.transpose() * (theta - mode_);
  return log_norm_ - 0.5 * z.squaredNorm();
}

Eigen::VectorXd GaussianApprox::sample(Rng& rng) const {
  const Eigen::Index dim = mode_.size();
  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] = rng.normal();
  // theta = mode + L'^{-1} z has covariance (L L')^{-1}.
  chol_lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(z);
  return mode_ + z;
}

// ---------------------------------------------------------------------- Laplace

Eigen::VectorXd default_laplace_start(const BlockData& data) {
  Eigen::VectorXd start = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.num_basis() + 1));
  if (data.num_subjects() == 0 || data.num_frequencies() == 0) return start;
  double mean = 0.0;
  for (double s : data.periodogram_sum()) mean += s;
  mean /= static_cast<double>(data.num_frequencies() * data.num_subjects());
  if (mean > 0.0 && std::isfinite(mean)) start[0] = std::log(mean);
  return start;
}

LaplaceResult laplace_approx(const BlockData& data, double tau2, double sigma2_alpha,
                             const Eigen::VectorXd& init, const LaplaceSettings& settings) {
  check_theta(init, data);
  check_tau2(tau2);
  LaplaceResult result;
  Eigen::VectorXd theta = init;
  for (int it = 0; it <= settings.max_iterations; ++it) {
    GradHessian gh = grad_hessian(theta, tau2, data, sigma2_alpha);
    if (!std::isfinite(gh.value) || !gh.gradient.allFinite() || !gh.hessian.allFinite()) {
      result.status = LaplaceStatus::NonFinite;
      result.iterations = it;
      return result;
    }
    const Eigen::MatrixXd neg_hessian = -gh.hessian;
    if (gh.gradient.lpNorm<Eigen::Infinity>() < settings.gradient_tolerance) {
      result.iterations = it;
      result.approx = GaussianApprox::from_precision(theta, neg_hessian);
      result.status = result.approx ? LaplaceStatus::Converged : LaplaceStatus::NotPositiveDefinite;
      return result;
    }
    if (it == settings.max_iterations) break;

    Eigen::LLT<Eigen::MatrixXd> llt(neg_hessian);
    if (llt.info() != Eigen::Success) {
      result.status = LaplaceStatus::NotPositiveDefinite;
      result.iterations = it;
      return result;
    }
    const Eigen::VectorXd step = llt.solve(gh.gradient);
    // Near the mode the predicted gain falls below the rounding noise of the
    // objective, so a step counts as an ascent unless it loses more than that.
    const double noise = 1e-12 * std::max(1.0, std::abs(gh.value));
    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h <= settings.max_halvings; ++h, scale *= 0.5) {
      const Eigen::VectorXd candidate = theta + scale * step;
      const double value = log_conditional_posterior(candidate, tau2, data, sigma2_alpha);
      if (std::isfinite(value) && value >= gh.value - noise) {
        theta = candidate;
        improved = true;
        break;
      }
    }
    if (!improved) {
      result.status = LaplaceStatus::LineSearchFailed;
      result.iterations = it;
      return result;
    }
  }
  result.status = LaplaceStatus::MaxIterations;
  result.iterations = settings.max_iterations;
  return result;
}

// ------------------------------------------------------------------------- tau2

InverseGammaParams tau2_conditional(std::span<const double> beta, const PenaltyMatrix& penalty,
                                    Tau2Prior prior) {
  const double num_basis = static_cast<double>(beta.size());
  const double shape = prior == Tau2Prior::Uniform ? num_basis / 2.0 - 1.0 : num_basis / 2.0;
  if (!(shape > 0.0)) {
    throw std::invalid_argument("tau2 update needs B >= 3 (inverse-gamma shape B/2 - 1 > 0)");
  }
  const double scale = std::max(penalty.quadratic_form(beta) / 2.0, 1e-12);
  return {shape, scale};
}

double gibbs_tau2(std::span<const double> beta, const PenaltyMatrix& penalty, Rng& rng,
                  Tau2Prior prior, double tau2_max) {
  const auto [shape, scale] = tau2_conditional(beta, penalty, prior);
  // tau2 = scale / G with G ~ Gamma(shape, 1); tau2 <= tau2_max iff G >= g0.
  const double g0 = std::isfinite(tau2_max) ? scale / tau2_max : 0.0;
  const double upper_tail = g0 > 0.0 ? boost::math::gamma_q(shape, g0) : 1.0;
  if (!(upper_tail > 0.0)) return tau2_max;
  const double v = rng.uniform_open() * upper_tail;
  const double g = boost::math::gamma_q_inv(shape, v);
  return std::min(scale / g, tau2_max);
}

double log_tau2_prior(double tau2, Tau2Prior prior, double tau2_max) {
  if (!(tau2 > 0.0) || tau2 > tau2_max) return -INFINITY;
  if (prior == Tau2Prior::Reciprocal) return -std::log(tau2);
  return std::isfinite(tau2_max) ? -std::log(tau2_max) : 0.0;
}

}  // namespace covspec
