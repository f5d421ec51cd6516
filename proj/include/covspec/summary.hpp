#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "covspec/sampler.hpp"

namespace covspec {

/// Chain states with iteration > burn_in. Throws std::invalid_argument when
/// none are left.
std::vector<const ChainState*> post_burn_in(std::span<const ChainState> chain, std::size_t burn_in);

struct ModelPosterior {
  std::size_t draws = 0;
  std::map<std::size_t, double> m;  // Pr(m = key)
  std::map<std::size_t, double> p;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;

  double prob_m(std::size_t k) const;
  double prob_p(std::size_t k) const;
  /// Most frequent (m, p); ties go to the smaller pair.
  std::pair<std::size_t, std::size_t> modal() const;
};

ModelPosterior model_posterior(std::span<const ChainState> chain, std::size_t burn_in);

/// Restricts summaries to iterations with the given segment counts; unset
/// fields do not filter.
struct ModelFilter {
  std::optional<std::size_t> m;
  std::optional<std::size_t> p;

  bool admits(const ChainState& s) const {
    return (!m || s.m() == *m) && (!p || s.p() == *p);
  }
};

struct CutPosterior {
  std::size_t draws = 0;                             // iterations carrying this cut
  double mean = 0.0;
  std::map<double, std::size_t> histogram;           // cut value -> count
  double mode() const;
};

struct PartitionPosterior {
  std::size_t draws = 0;
  /// Cut k is summarized over the admitted iterations that have at least
  /// k + 1 cuts. Time cuts are observation indices, covariate cuts are
  /// rescaled covariate values.
  std::vector<CutPosterior> time_cuts;
  std::vector<CutPosterior> cov_cuts;
  /// Per admitted iteration: (iteration, cuts).
  std::vector<std::pair<std::size_t, std::vector<double>>> time_trace;
  std::vector<std::pair<std::size_t, std::vector<double>>> cov_trace;
};

PartitionPosterior partition_posterior(std::span<const ChainState> chain, std::size_t burn_in,
                                       const ModelFilter& filter = {});

/// Type-7 (linear interpolation) empirical quantile; sorts `values`.
double quantile(std::vector<double>& values, double prob);

/// Scaled times u in (0, 1], covariates w in [0, 1], frequencies in (0, 1/2).
struct SurfaceGrid {
  std::vector<double> time;
  std::vector<double> cov;
  std::vector<double> freq;

  /// n_u points u = (i + 1/2) / n_u, n_w points spanning [0, 1], n_nu points
  /// nu = (k + 1/2) / (2 n_nu).
  static SurfaceGrid regular(std::size_t n_time, std::size_t n_cov, std::size_t n_freq);
};

struct SpectrumSurface {
  SurfaceGrid grid;
  double level = 0.95;
  std::size_t draws = 0;
  std::vector<double> mean_log_f;  // index (iu * n_w + iw) * n_nu + inu
  std::vector<double> lower;
  std::vector<double> upper;

  /// An empty covariate grid counts as one point (pass iw = 0).
  std::size_t index(std::size_t iu, std::size_t iw, std::size_t inu) const {
    const std::size_t n_w = grid.cov.empty() ? 1 : grid.cov.size();
    return (iu * n_w + iw) * grid.freq.size() + inu;
  }
};

/// Observation index (0-based) holding scaled time u for a length-T series.
std::size_t time_index(double u, std::size_t length);

/// Pointwise posterior mean and equal-tailed `level` band of log f(u, w, nu)
/// over the admitted post-burn-in iterations.
SpectrumSurface spectrum_surface(std::span<const ChainState> chain, std::size_t burn_in,
                                 const SurfaceGrid& grid, double level = 0.95,
                                 const ModelFilter& filter = {});

/// Time-frequency surface for covariate segment g over the iterations at
/// (m, p); the covariate grid is left empty.
struct ConditionalSurface {
  std::size_t m = 0, p = 0;
  std::size_t cov_segment = 0;
  /// Range of covariate values this segment covered in the admitted draws.
  double cov_lo = 0.0, cov_hi = 0.0;
  SpectrumSurface surface;
};

/// One surface per covariate segment, conditional on `mp` (the modal pair
/// when unset).
std::vector<ConditionalSurface> conditional_surfaces(
    std::span<const ChainState> chain, std::size_t burn_in, const std::vector<double>& time_grid,
    const std::vector<double>& freq_grid, double level = 0.95,
    std::optional<std::pair<std::size_t, std::size_t>> mp = std::nullopt);

struct Band {
  double lo = 0.0;
  double hi = 0.0;
};

struct CollapsedConfig {
  std::string name = "HFnu";
  Band band{0.15, 0.40};
  Band norm{0.04, 0.40};
  /// Samples per second; band edges are in Hz and divided by this.
  double sampling_rate = 1.0;
  std::size_t points = 512;
  double level = 0.95;

  /// Throws ConfigError unless 0 <= norm.lo <= band.lo < band.hi <= norm.hi
  /// <= sampling_rate / 2.
  void validate() const;
};

/// Trapezoid integral of exp(alpha + sum_b beta_b cos(2 pi b nu)) over
/// [lo, hi] in cycles per sample.
double band_power(double alpha, std::span<const double> beta, Band band, std::size_t points);

/// band_power over `band` divided by band_power over `norm` (both already in
/// cycles per sample).
double band_ratio(double alpha, std::span<const double> beta, Band band, Band norm,
                  std::size_t points);

struct BlockMeasure {
  std::size_t time_segment = 0;
  std::size_t cov_segment = 0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct CollapsedMeasure {
  std::string name;
  Band band;  // cycles per sample
  Band norm;
  double sampling_rate = 1.0;
  double level = 0.95;
  std::size_t m = 0, p = 0;
  std::size_t draws = 0;
  std::vector<BlockMeasure> blocks;  // time-major
};

/// Band ratio per block over the iterations at `mp` (the modal pair when
/// unset), so that block indices refer to the same segments across draws.
CollapsedMeasure collapsed_measure(std::span<const ChainState> chain, std::size_t burn_in,
                                   const CollapsedConfig& config,
                                   std::optional<std::pair<std::size_t, std::size_t>> mp =
                                       std::nullopt);

/// "0.27 (0.21, 0.34)".
std::string format_estimate(double mean, double lower, double upper, int decimals = 2);

/// Plain-text report, one line per block.
std::string format_collapsed(const CollapsedMeasure& measure, int decimals = 2);

}  // namespace covspec
