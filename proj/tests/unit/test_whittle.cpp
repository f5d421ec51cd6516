#include <doctest.h>

#include <stdexcept>

#include <boost/math/distributions/inverse_gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "covspec/data_model.hpp"
#include "covspec/whittle.hpp"
#include "helpers.hpp"

using namespace covspec;
using std::numbers::pi;

namespace {

const double kLog2Pi = std::log(2.0 * pi);

std::shared_ptr<const BasisMatrix> basis(const FourierGrid& g, std::size_t B) {
  return std::make_shared<const BasisMatrix>(g, B);
}

BlockData single(const Periodogram& p, std::size_t B) {
  const Periodogram* ptrs[] = {&p};
  return BlockData(ptrs, basis(p.grid, B));
}

// A Complete-rule block with several subjects, so the zero and Nyquist
// terms are exercised.
BlockData complete_block(std::size_t T, std::size_t subjects, std::size_t B, std::uint64_t seed) {
  std::vector<Periodogram> ps;
  for (std::size_t l = 0; l < subjects; ++l) {
    auto x = testing::white_noise(T, seed * 100 + l);
    ps.push_back(periodogram(demean(x), FrequencyRule::Complete));
    ps.back().zero_value = 0.3 + 0.1 * static_cast<double>(l);
  }
  std::vector<const Periodogram*> ptrs;
  for (const auto& p : ps) ptrs.push_back(&p);
  return BlockData(ptrs, basis(ps.front().grid, B));
}

Eigen::VectorXd random_theta(std::size_t B, Rng& rng) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(B + 1));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = 0.6 * rng.normal() / (1.0 + i);
  return t;
}

// Conditional log posterior written out term by term for one subject; omits
// every constant.
double literal_posterior(const Eigen::VectorXd& theta, double tau2, const Periodogram& y,
                         double s2a) {
  const std::size_t B = static_cast<std::size_t>(theta.size()) - 1;
  double sum = 0.0;
  for (std::size_t k = 0; k < y.grid.n; ++k) {
    double zb = 0.0;
    for (std::size_t b = 1; b <= B; ++b) {
      zb += std::cos(2.0 * pi * b * y.grid.frequencies[k]) * theta[static_cast<Eigen::Index>(b)];
    }
    sum += theta[0] + zb + std::exp(std::log(y.values[k]) - theta[0] - zb);
  }
  double quad = 0.0;
  for (std::size_t b = 1; b <= B; ++b) {
    const double beta = theta[static_cast<Eigen::Index>(b)];
    quad += beta * beta * std::pow(2.0 * pi * b, 2.0);
  }
  return -sum - theta[0] * theta[0] / (2.0 * s2a) - quad / (2.0 * tau2);
}

// Kolmogorov-Smirnov statistic of `xs` against `cdf`.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

}  // namespace

TEST_CASE("flat-spectrum likelihood") {
  const auto x = demean(testing::white_noise(200, 5));
  const auto p = periodogram(x);
  const auto one = single(p, 7);
  BlockParams flat{0.0, std::vector<double>(7, 0.0), 1.0};
  const double n = static_cast<double>(p.grid.n);
  const double sum_y = std::accumulate(p.values.begin(), p.values.end(), 0.0);
  CHECK(block_log_whittle(flat, one) == doctest::Approx(-(n / 2) * kLog2Pi - sum_y).epsilon(1e-12));

  const Periodogram* twice[] = {&p, &p};
  BlockData two(twice, basis(p.grid, 7));
  CHECK(block_log_whittle(flat, two) == doctest::Approx(2.0 * block_log_whittle(flat, one)));

  Periodogram zero = p;
  std::fill(zero.values.begin(), zero.values.end(), 0.0);
  CHECK(block_log_whittle(flat, single(zero, 7)) == doctest::Approx(-(n / 2) * kLog2Pi));
}

TEST_CASE("likelihood is additive over subjects and frequencies") {
  Rng rng(8);
  const auto a = periodogram(demean(testing::white_noise(150, 1)));
  const auto b = periodogram(demean(testing::white_noise(150, 2)));
  const Periodogram* both[] = {&a, &b};
  BlockData ab(both, basis(a.grid, 5));
  const auto theta = random_theta(5, rng);
  CHECK(block_log_whittle(theta, ab) ==
        doctest::Approx(block_log_whittle(theta, single(a, 5)) + block_log_whittle(theta, single(b, 5))));

  // Summed-periodogram form equals the pointer form.
  std::vector<double> sum(a.values.size());
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = a.values[k] + b.values[k];
  BlockData summed(sum, 2, basis(a.grid, 5));
  CHECK(block_log_whittle(theta, summed) == doctest::Approx(block_log_whittle(theta, ab)));
}

TEST_CASE("complete rule adds half-weight edge ordinates") {
  Rng rng(2);
  const std::size_t T = 120;
  const auto grid = fourier_grid(T, FrequencyRule::Complete);
  const auto z = basis(grid, 4);
  std::vector<double> sum(grid.n, 0.0);
  for (double& s : sum) s = std::exp(rng.normal());
  const double s0 = 0.7, sn = 1.9;
  BlockData with(sum, 3, z, sn, FrequencyRule::Complete, s0);
  BlockData without(sum, 3, z, std::nullopt, FrequencyRule::Complete, std::nullopt);
  const auto theta = random_theta(4, rng);
  const double f0 = theta.sum();
  const double fn = theta[0] - theta[1] + theta[2] - theta[3] + theta[4];
  const double edge = -0.5 * (3 * f0 + s0 * std::exp(-f0)) - 0.5 * (3 * fn + sn * std::exp(-fn)) -
                      2 * 0.5 * 3 * kLog2Pi;
  CHECK(block_log_whittle(theta, with) == doctest::Approx(block_log_whittle(theta, without) + edge));

  // Interior ordinates carry two dimensions each under Complete.
  BlockData standard(sum, 3, z);
  CHECK(block_log_whittle(theta, without) ==
        doctest::Approx(block_log_whittle(theta, standard) - 3 * (grid.n / 2.0) * kLog2Pi));
  CHECK_THROWS_AS(BlockData(sum, 3, z, sn), std::invalid_argument);
}

TEST_CASE("conditional posterior matches a literal transcription") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = periodogram(demean(testing::white_noise(100 + 7 * rep, 300 + rep)));
    const auto data = single(p, 7);
    const auto theta = random_theta(7, rng);
    const double tau2 = std::exp(rng.normal());
    const double s2a = 100.0;
    const double ours = log_conditional_posterior(theta, tau2, data, s2a);
    const double lit = literal_posterior(theta, tau2, p, s2a);
    // The offset is the sum of the normalizing constants.
    // log det D = -2 sum_b log(2 pi b).
    double half_log_det_inv = 0.0;
    for (int b = 1; b <= 7; ++b) half_log_det_inv += std::log(2 * pi * b);
    const double offset = -(p.grid.n / 2.0) * kLog2Pi - 0.5 * std::log(2 * pi * s2a) -
                          3.5 * std::log(2 * pi * tau2) + half_log_det_inv;
    CHECK(conditional_posterior_offset(data, tau2, s2a) == doctest::Approx(offset).epsilon(1e-12));
    CHECK(ours - conditional_posterior_offset(data, tau2, s2a) == doctest::Approx(lit).epsilon(1e-10));
  }
}

TEST_CASE("penalty behaviour in tau2") {
  const auto p = periodogram(demean(testing::white_noise(100, 1)));
  const auto data = single(p, 7);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(8);
  theta[0] = 0.2;
  auto unnormalized = [&](double tau2) {
    return log_conditional_posterior(theta, tau2, data, 100.0) -
           conditional_posterior_offset(data, tau2, 100.0);
  };
  // beta = 0: tau2 does not enter.
  CHECK(unnormalized(1.0) == doctest::Approx(unnormalized(3.0)));
  theta[3] = 0.1;
  CHECK(unnormalized(2.0) > unnormalized(1.0));
  CHECK_THROWS_AS(log_conditional_posterior(theta, 0.0, data, 100.0), std::invalid_argument);
}

TEST_CASE("analytic derivatives match finite differences") {
  Rng rng(99);
  const double h = 1e-5;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t B = 3 + rep % 6;
    const std::size_t T = 40 + 13 * (rep % 11);
    const BlockData data = rep % 2 == 0
                               ? complete_block(T, 1 + rep % 3, B, rep)
                               : single(periodogram(demean(testing::white_noise(T, rep))), B);
    const auto theta = random_theta(B, rng);
    const double tau2 = std::exp(rng.normal());
    const auto gh = grad_hessian(theta, tau2, data, 100.0);
    CHECK(gh.value == doctest::Approx(log_conditional_posterior(theta, tau2, data, 100.0)));
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd up = theta, dn = theta;
      up[i] += h;
      dn[i] -= h;
      const double fd = (log_conditional_posterior(up, tau2, data, 100.0) -
                         log_conditional_posterior(dn, tau2, data, 100.0)) / (2 * h);
      CHECK(std::abs(fd - gh.gradient[i]) < 1e-5 * std::max(1.0, std::abs(fd)));
      const Eigen::VectorXd hd = (grad_hessian(up, tau2, data, 100.0).gradient -
                                  grad_hessian(dn, tau2, data, 100.0).gradient) / (2 * h);
      for (Eigen::Index j = 0; j < theta.size(); ++j) {
        CHECK(std::abs(hd[j] - gh.hessian(i, j)) < 1e-5 * std::max(1.0, std::abs(hd[j])));
        CHECK(gh.hessian(i, j) == gh.hessian(j, i));
      }
    }
    // Negative definite.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gh.hessian);
    CHECK(eig.eigenvalues().maxCoeff() < 0.0);
  }
}

TEST_CASE("Laplace approximation") {
  const auto data = complete_block(300, 2, 7, 4);
  const auto fit = laplace_approx(data, 1.0, 100.0, default_laplace_start(data));
  REQUIRE(fit.ok());
  const auto& g = *fit.approx;
  const auto gh = grad_hessian(g.mode(), 1.0, data, 100.0);
  CHECK(gh.gradient.lpNorm<Eigen::Infinity>() < 1e-6);
  const Eigen::MatrixXd cov = (-gh.hessian).inverse();
  CHECK((g.covariance() - cov).norm() <= 1e-8 * cov.norm());
  CHECK((g.covariance() - g.covariance().transpose()).norm() == 0.0);

  const auto again = laplace_approx(data, 1.0, 100.0, g.mode());
  REQUIRE(again.ok());
  CHECK(again.iterations <= 1);

  // The log density is the multivariate normal one.
  const Eigen::VectorXd x = g.mode() + 0.01 * Eigen::VectorXd::Ones(8);
  const Eigen::VectorXd d = x - g.mode();
  const double logdet = std::log(cov.determinant());
  const double expect = -0.5 * (8 * kLog2Pi + logdet + d.dot(cov.inverse() * d));
  CHECK(g.log_density(x) == doctest::Approx(expect).epsilon(1e-9));

  // Sampling: empirical mean near the mode.
  Rng rng(1);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(8);
  for (int i = 0; i < 20000; ++i) mean += g.sample(rng) / 20000.0;
  for (int i = 0; i < 8; ++i) CHECK(std::abs(mean[i] - g.mode()[i]) < 5 * std::sqrt(cov(i, i) / 20000.0));
}

TEST_CASE("Laplace Newton iterates increase the posterior") {
  const auto data = complete_block(200, 1, 7, 9);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(8);
  start[0] = 2.0;
  start[1] = -1.0;
  double prev = log_conditional_posterior(start, 0.5, data, 100.0);
  for (int it = 1; it < 6; ++it) {
    LaplaceSettings s;
    s.max_iterations = it;
    s.gradient_tolerance = 0.0;
    const auto r = laplace_approx(data, 0.5, 100.0, start, s);
    if (!r.approx) break;
    const double v = log_conditional_posterior(r.approx->mode(), 0.5, data, 100.0);
    CHECK(v >= prev - 1e-9);
    prev = v;
  }
}

TEST_CASE("Laplace mode on white noise centres alpha near zero") {
  int inside = 0;
  double mean_beta = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto p = periodogram(demean(testing::white_noise(1000, seed)));
    const auto data = single(p, 7);
    const auto r = laplace_approx(data, 1.0, 100.0, default_laplace_start(data));
    REQUIRE(r.ok());
    const auto& g = *r.approx;
    if (std::abs(g.mode()[0]) < 3.0 * std::sqrt(g.covariance()(0, 0))) ++inside;
    mean_beta += g.mode().tail(7).cwiseAbs().maxCoeff() / 50.0;
  }
  CHECK(inside >= 48);
  CHECK(mean_beta < 0.1);
}

TEST_CASE("tau2 Gibbs draw: moments and scale family") {
  const PenaltyMatrix d(7);
  // beta' D^-1 beta = 2 with a single nonzero coefficient.
  std::vector<double> beta(7, 0.0);
  beta[0] = std::sqrt(2.0) / (2 * pi);
  CHECK(d.quadratic_form(beta) == doctest::Approx(2.0));
  const auto ig = tau2_conditional(beta, d, Tau2Prior::Uniform);
  CHECK(ig.shape == doctest::Approx(2.5));
  CHECK(ig.scale == doctest::Approx(1.0));
  CHECK(tau2_conditional(beta, d, Tau2Prior::Reciprocal).shape == doctest::Approx(3.5));

  Rng rng(123);
  double mean = 0.0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) mean += gibbs_tau2(beta, d, rng) / draws;
  CHECK(std::abs(mean - 1.0 / 1.5) < 0.02 * (1.0 / 1.5));

  // Scaling beta by c scales tau2 by c^2: compare means.
  std::vector<double> scaled = beta;
  for (double& b : scaled) b *= 3.0;
  Rng r2(5);
  double mean3 = 0.0;
  for (int i = 0; i < 200000; ++i) mean3 += gibbs_tau2(scaled, d, r2) / 200000.0;
  CHECK(mean3 / 9.0 == doctest::Approx(1.0 / 1.5).epsilon(0.03));
}

TEST_CASE("tau2 Gibbs draw passes KS against the inverse gamma") {
  const PenaltyMatrix d(7);
  std::vector<double> beta{0.05, -0.02, 0.01, 0.0, 0.004, 0.0, -0.001};
  const auto ig = tau2_conditional(beta, d, Tau2Prior::Uniform);
  boost::math::inverse_gamma_distribution<double> target(ig.shape, ig.scale);
  Rng rng(2024);
  std::vector<double> xs(100000);
  for (double& x : xs) x = gibbs_tau2(beta, d, rng);
  const double D = ks_statistic(xs, [&](double x) { return boost::math::cdf(target, x); });
  CHECK(D < 1.628 / std::sqrt(100000.0));

  // Truncated to (0, tau2_max].
  const double cap = boost::math::quantile(target, 0.6);
  Rng rt(7);
  std::vector<double> ts(100000);
  for (double& x : ts) x = gibbs_tau2(beta, d, rt, Tau2Prior::Uniform, cap);
  CHECK(*std::max_element(ts.begin(), ts.end()) <= cap);
  const double Dt = ks_statistic(ts, [&](double x) { return boost::math::cdf(target, x) / 0.6; });
  CHECK(Dt < 1.628 / std::sqrt(100000.0));
}

TEST_CASE("tau2 Gibbs draw guards") {
  Rng rng(1);
  const std::vector<double> zero(7, 0.0);
  const double t = gibbs_tau2(zero, PenaltyMatrix(7), rng);
  CHECK(std::isfinite(t));
  CHECK(t > 0.0);
  CHECK_THROWS_AS(gibbs_tau2(std::vector<double>(2, 0.1), PenaltyMatrix(2), rng), std::invalid_argument);
  CHECK(log_tau2_prior(-1.0, Tau2Prior::Uniform, 10.0) == -std::numeric_limits<double>::infinity());
  CHECK(log_tau2_prior(11.0, Tau2Prior::Uniform, 10.0) == -std::numeric_limits<double>::infinity());
  CHECK(log_tau2_prior(5.0, Tau2Prior::Uniform, 10.0) == doctest::Approx(-std::log(10.0)));
}
