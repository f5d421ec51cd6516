#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "covspec/data_model.hpp"

namespace covspec {

enum class SimKind { PiecewiseAr, SlowlyVaryingAr, CustomAr };

/// Parses "piecewise-ar", "slowly-varying-ar" or "custom-ar"; throws
/// ConfigError otherwise.
SimKind parse_sim_kind(std::string_view name);
const char* sim_kind_name(SimKind kind);

struct SimDesign {
  SimKind kind = SimKind::PiecewiseAr;
  std::size_t num_subjects = 8;
  std::size_t length = 1000;
  std::uint64_t seed = 1;
  double phi = 0.5;  // custom-ar only
};

/// Subject covariates w_l = (l - 1) / (L - 1).
std::vector<double> equispaced_covariates(std::size_t num_subjects);

/// AR coefficient at 1-based time t for a subject with covariate w:
/// -phi_w for t <= T/2 and +phi_w afterwards, phi_w = 0.5 if w <= 0.5 else 0.9.
double piecewise_ar_coefficient(double w, std::size_t t, std::size_t length);

/// -0.5 + t/T if w <= 0.5, else -0.9 + 1.8 t/T.
double slowly_varying_ar_coefficient(double w, std::size_t t, std::size_t length);

/// Each subject is driven by its own sub-stream of `seed`; innovations are
/// standard normal. The piecewise recursion starts from the stationary
/// distribution of its first regime and runs through the change point
/// without restarting. The slowly varying recursion starts at x_0 = 0.
TimeSeriesSet gen_piecewise_ar(std::size_t num_subjects, std::size_t length, std::uint64_t seed);
TimeSeriesSet gen_slowly_varying_ar(std::size_t num_subjects, std::size_t length,
                                    std::uint64_t seed);
/// Stationary AR(1) with coefficient phi (|phi| < 1) for every subject.
TimeSeriesSet gen_custom_ar(std::size_t num_subjects, std::size_t length, double phi,
                            std::uint64_t seed);

/// Throws DataError for L < 2 or T < 4 (the dataset invariants) and
/// ConfigError for |phi| >= 1 with custom-ar.
TimeSeriesSet simulate(const SimDesign& design);

/// -log(1 + phi^2 - 2 phi cos(2 pi nu)): log spectrum of AR(1) with unit
/// innovation variance.
std::vector<double> ar1_true_log_spectrum(double phi, std::span<const double> frequencies);
double ar1_true_log_spectrum(double phi, double frequency);

}  // namespace covspec
