#include "covspec/simgen.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "covspec/error.hpp"
#include "covspec/rng.hpp"

namespace covspec {

namespace {

constexpr std::uint64_t kSimStream = 0x51u;

template <class Coef>
TimeSeriesSet generate(std::size_t num_subjects, std::size_t length, std::uint64_t seed,
                       bool stationary_start, Coef coefficient) {
  if (num_subjects < 2) {
    throw DataError("need at least two subjects to rescale covariates, got " +
                    std::to_string(num_subjects));
  }
  if (length < 4) throw DataError("series length T=" + std::to_string(length) + " is below 4");
  const std::vector<double> w = equispaced_covariates(num_subjects);
  std::vector<std::vector<double>> series(num_subjects, std::vector<double>(length));
  for (std::size_t l = 0; l < num_subjects; ++l) {
    Rng rng = Rng::substream(seed, kSimStream, l);
    double x = 0.0;
    if (stationary_start) {
      const double phi = coefficient(w[l], 1);
      x = rng.normal() / std::sqrt(1.0 - phi * phi);
    }
    for (std::size_t t = 1; t <= length; ++t) {
      x = coefficient(w[l], t) * x + rng.normal();
      series[l][t - 1] = x;
    }
  }
  return TimeSeriesSet(std::move(series), w);
}

}  // namespace

SimKind parse_sim_kind(std::string_view name) {
  if (name == "piecewise-ar") return SimKind::PiecewiseAr;
  if (name == "slowly-varying-ar") return SimKind::SlowlyVaryingAr;
  if (name == "custom-ar") return SimKind::CustomAr;
  throw ConfigError("unknown simulation design '" + std::string(name) +
                    "' (expected piecewise-ar, slowly-varying-ar or custom-ar)");
}

const char* sim_kind_name(SimKind kind) {
  switch (kind) {
    case SimKind::PiecewiseAr: return "piecewise-ar";
    case SimKind::SlowlyVaryingAr: return "slowly-varying-ar";
    case SimKind::CustomAr: return "custom-ar";
  }
  return "unknown";
}

std::vector<double> equispaced_covariates(std::size_t num_subjects) {
  std::vector<double> w(num_subjects, 0.0);
  for (std::size_t l = 0; l < num_subjects; ++l) {
    w[l] = num_subjects > 1 ? static_cast<double>(l) / static_cast<double>(num_subjects - 1) : 0.0;
  }
  return w;
}

double piecewise_ar_coefficient(double w, std::size_t t, std::size_t length) {
  const double phi = w <= 0.5 ? 0.5 : 0.9;
  return t <= length / 2 ? -phi : phi;
}

double slowly_varying_ar_coefficient(double w, std::size_t t, std::size_t length) {
  const double u = static_cast<double>(t) / static_cast<double>(length);
  return w <= 0.5 ? -0.5 + u : -0.9 + 1.8 * u;
}

TimeSeriesSet gen_piecewise_ar(std::size_t num_subjects, std::size_t length, std::uint64_t seed) {
  return generate(num_subjects, length, seed, true, [length](double w, std::size_t t) {
    return piecewise_ar_coefficient(w, t, length);
  });
}

TimeSeriesSet gen_slowly_varying_ar(std::size_t num_subjects, std::size_t length,
                                    std::uint64_t seed) {
  return generate(num_subjects, length, seed, false, [length](double w, std::size_t t) {
    return slowly_varying_ar_coefficient(w, t, length);
  });
}

TimeSeriesSet gen_custom_ar(std::size_t num_subjects, std::size_t length, double phi,
                            std::uint64_t seed) {
  if (!(std::abs(phi) < 1.0)) throw ConfigError("custom AR coefficient must satisfy |phi| < 1");
  return generate(num_subjects, length, seed, true, [phi](double, std::size_t) { return phi; });
}

TimeSeriesSet simulate(const SimDesign& design) {
  switch (design.kind) {
    case SimKind::PiecewiseAr:
      return gen_piecewise_ar(design.num_subjects, design.length, design.seed);
    case SimKind::SlowlyVaryingAr:
      return gen_slowly_varying_ar(design.num_subjects, design.length, design.seed);
    case SimKind::CustomAr:
      return gen_custom_ar(design.num_subjects, design.length, design.phi, design.seed);
  }
  throw ConfigError("unknown simulation design");
}

double ar1_true_log_spectrum(double phi, double frequency) {
  return -std::log(1.0 + phi * phi - 2.0 * phi * std::cos(2.0 * std::numbers::pi * frequency));
}

std::vector<double> ar1_true_log_spectrum(double phi, std::span<const double> frequencies) {
  std::vector<double> out(frequencies.size());
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    out[k] = ar1_true_log_spectrum(phi, frequencies[k]);
  }
  return out;
}

}  // namespace covspec
