#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "covspec/data_model.hpp"
#include "covspec/error.hpp"
#include "covspec/simgen.hpp"
#include "covspec/spectral.hpp"

using namespace covspec;

namespace {

double lag1_autocorrelation(std::span<const double> x) {
  const auto y = demean(x);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    den += y[t] * y[t];
    if (t > 0) num += y[t] * y[t - 1];
  }
  return num / den;
}

// Mean squared error of the log of a moving-average-smoothed periodogram.
double smoothed_ise(std::span<const double> x, double phi) {
  const auto p = periodogram(demean(x));
  const std::size_t n = p.grid.n;
  const auto h = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)) / 2);
  double ise = 0.0;
  std::size_t used = 0;
  for (std::size_t k = h; k + h < n; ++k) {
    double s = 0.0;
    for (std::size_t i = k - h; i <= k + h; ++i) s += p.values[i];
    const double est = std::log(s / static_cast<double>(2 * h + 1));
    const double d = est - ar1_true_log_spectrum(phi, p.grid.frequencies[k]);
    ise += d * d;
    ++used;
  }
  return ise / static_cast<double>(used);
}

}  // namespace

TEST_CASE("design coefficients") {
  const auto w = equispaced_covariates(8);
  CHECK(w.front() == 0.0);
  CHECK(w.back() == 1.0);
  CHECK(w[3] == doctest::Approx(3.0 / 7.0));
  CHECK(piecewise_ar_coefficient(0.2, 1, 1000) == -0.5);
  CHECK(piecewise_ar_coefficient(0.2, 500, 1000) == -0.5);
  CHECK(piecewise_ar_coefficient(0.2, 501, 1000) == 0.5);
  CHECK(piecewise_ar_coefficient(0.5, 1000, 1000) == 0.5);
  CHECK(piecewise_ar_coefficient(0.6, 1000, 1000) == 0.9);
  CHECK(piecewise_ar_coefficient(0.6, 10, 1000) == -0.9);
  CHECK(slowly_varying_ar_coefficient(0.2, 500, 1000) == doctest::Approx(0.0));
  CHECK(slowly_varying_ar_coefficient(0.8, 1000, 1000) == doctest::Approx(0.9));
  CHECK(slowly_varying_ar_coefficient(0.8, 0, 1000) == doctest::Approx(-0.9));
  for (std::size_t t = 0; t <= 1000; ++t) {
    CHECK(std::abs(slowly_varying_ar_coefficient(0.0, t, 1000)) < 1.0);
    CHECK(std::abs(slowly_varying_ar_coefficient(1.0, t, 1000)) < 1.0);
  }
}

TEST_CASE("piecewise AR autocorrelations") {
  const auto d = gen_piecewise_ar(8, 1000, 1);
  CHECK(d.num_subjects() == 8);
  CHECK(d.length() == 1000);
  CHECK(std::abs(lag1_autocorrelation(d.series(0).first(500)) + 0.5) < 0.1);
  for (std::size_t l = 4; l < 8; ++l) {
    CHECK(std::abs(lag1_autocorrelation(d.series(l).subspan(500)) - 0.9) < 0.05);
  }
  // Averaged over seeds the estimates sit on the true values.
  double low = 0.0, high = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto e = gen_piecewise_ar(8, 1000, seed);
    low += lag1_autocorrelation(e.series(1).first(500)) / 20;
    high += lag1_autocorrelation(e.series(6).subspan(500)) / 20;
  }
  CHECK(std::abs(low + 0.5) < 0.03);
  CHECK(std::abs(high - 0.9) < 0.02);
}

TEST_CASE("generators are deterministic in the seed") {
  CHECK(gen_piecewise_ar(8, 300, 5).all_series() == gen_piecewise_ar(8, 300, 5).all_series());
  CHECK(gen_piecewise_ar(8, 300, 5).all_series() != gen_piecewise_ar(8, 300, 6).all_series());
  CHECK(gen_slowly_varying_ar(4, 300, 5).all_series() == gen_slowly_varying_ar(4, 300, 5).all_series());
  const auto d = gen_custom_ar(3, 200, 0.5, 9);
  CHECK(d.all_series() == gen_custom_ar(3, 200, 0.5, 9).all_series());
  CHECK(d.series(0)[10] != d.series(1)[10]);
}

TEST_CASE("slowly varying paths stay bounded") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto d = gen_slowly_varying_ar(8, 1000, seed);
    for (const auto& row : d.all_series()) {
      for (double x : row) {
        REQUIRE(std::isfinite(x));
        REQUIRE(std::abs(x) < 100.0);
      }
    }
  }
}

TEST_CASE("AR(1) log spectrum") {
  const std::vector<double> nu{0.0, 0.1, 0.25, 0.5};
  for (double v : ar1_true_log_spectrum(0.0, nu)) CHECK(v == 0.0);
  CHECK(ar1_true_log_spectrum(0.5, 0.0) == doctest::Approx(std::log(4.0)));
  CHECK(ar1_true_log_spectrum(-0.5, 0.5) == doctest::Approx(std::log(4.0)));
  for (double f : {0.05, 0.2, 0.37}) {
    CHECK(ar1_true_log_spectrum(0.7, f) == doctest::Approx(ar1_true_log_spectrum(-0.7, 0.5 - f)));
  }
}

TEST_CASE("empirical spectra approach the AR(1) spectrum as T grows") {
  double prev = INFINITY;
  for (std::size_t T : {1024u, 4096u, 16384u}) {
    const auto d = gen_custom_ar(2, T, 0.5, 3);
    const double ise = smoothed_ise(d.series(0), 0.5);
    CHECK(ise < prev);
    prev = ise;
  }
}

TEST_CASE("simulate validates the design") {
  SimDesign d;
  d.num_subjects = 1;
  CHECK_THROWS_AS(simulate(d), DataError);
  d.num_subjects = 8;
  d.length = 3;
  CHECK_THROWS_AS(simulate(d), DataError);
  d.length = 200;
  d.kind = SimKind::CustomAr;
  d.phi = 1.0;
  CHECK_THROWS_AS(simulate(d), ConfigError);
  d.phi = -0.3;
  CHECK(simulate(d).all_series() == gen_custom_ar(8, 200, -0.3, 1).all_series());
  CHECK(parse_sim_kind("slowly-varying-ar") == SimKind::SlowlyVaryingAr);
  CHECK(std::string(sim_kind_name(SimKind::PiecewiseAr)) == "piecewise-ar");
  CHECK_THROWS_AS(parse_sim_kind("arma"), ConfigError);
}
