#include "covspec/summary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "covspec/error.hpp"
#include "covspec/spline_basis.hpp"

namespace covspec {

std::vector<const ChainState*> post_burn_in(std::span<const ChainState> chain,
                                            std::size_t burn_in) {
  std::vector<const ChainState*> out;
  for (const ChainState& s : chain) {
    if (s.iteration > burn_in) out.push_back(&s);
  }
  if (out.empty()) {
    throw std::invalid_argument("no iterations after burn-in " + std::to_string(burn_in));
  }
  return out;
}

// -------------------------------------------------------------------- model

double ModelPosterior::prob_m(std::size_t k) const {
  const auto it = m.find(k);
  return it == m.end() ? 0.0 : it->second;
}

double ModelPosterior::prob_p(std::size_t k) const {
  const auto it = p.find(k);
  return it == p.end() ? 0.0 : it->second;
}

std::pair<std::size_t, std::size_t> ModelPosterior::modal() const {
  std::pair<std::size_t, std::size_t> best{0, 0};
  double best_prob = -1.0;
  for (const auto& [mp, prob] : joint) {
    if (prob > best_prob) {
      best = mp;
      best_prob = prob;
    }
  }
  return best;
}

ModelPosterior model_posterior(std::span<const ChainState> chain, std::size_t burn_in) {
  const auto draws = post_burn_in(chain, burn_in);
  ModelPosterior out;
  out.draws = draws.size();
  std::map<std::size_t, std::size_t> mc, pc;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> jc;
  for (const ChainState* s : draws) {
    ++mc[s->m()];
    ++pc[s->p()];
    ++jc[{s->m(), s->p()}];
  }
  const double n = static_cast<double>(draws.size());
  for (const auto& [k, c] : mc) out.m[k] = static_cast<double>(c) / n;
  for (const auto& [k, c] : pc) out.p[k] = static_cast<double>(c) / n;
  for (const auto& [k, c] : jc) out.joint[k] = static_cast<double>(c) / n;
  return out;
}

// ---------------------------------------------------------------- partition

double CutPosterior::mode() const {
  double best = 0.0;
  std::size_t best_count = 0;
  for (const auto& [v, c] : histogram) {
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

namespace {

void add_cuts(std::vector<CutPosterior>& acc, const std::vector<double>& cuts) {
  if (acc.size() < cuts.size()) acc.resize(cuts.size());
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    ++acc[k].draws;
    acc[k].mean += cuts[k];
    ++acc[k].histogram[cuts[k]];
  }
}

void finish_cuts(std::vector<CutPosterior>& acc) {
  for (CutPosterior& c : acc) c.mean /= static_cast<double>(c.draws);
}

std::vector<double> time_cut_values(const ChainState& s) {
  return {s.time.cuts().begin(), s.time.cuts().end()};
}

double clamp_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("quantile level must lie in (0, 1), got " + std::to_string(level));
  }
  return level;
}

}  // namespace

PartitionPosterior partition_posterior(std::span<const ChainState> chain, std::size_t burn_in,
                                       const ModelFilter& filter) {
  PartitionPosterior out;
  for (const ChainState* s : post_burn_in(chain, burn_in)) {
    if (!filter.admits(*s)) continue;
    ++out.draws;
    const auto tc = time_cut_values(*s);
    const auto cc = s->cov.cut_values();
    add_cuts(out.time_cuts, tc);
    add_cuts(out.cov_cuts, cc);
    out.time_trace.emplace_back(s->iteration, tc);
    out.cov_trace.emplace_back(s->iteration, cc);
  }
  finish_cuts(out.time_cuts);
  finish_cuts(out.cov_cuts);
  return out;
}

double quantile(std::vector<double>& values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

// ------------------------------------------------------------------ surface

SurfaceGrid SurfaceGrid::regular(std::size_t n_time, std::size_t n_cov, std::size_t n_freq) {
  if (n_time == 0 || n_cov == 0 || n_freq == 0) {
    throw ConfigError("surface grids need at least one point per axis");
  }
  SurfaceGrid g;
  for (std::size_t i = 0; i < n_time; ++i) {
    g.time.push_back((static_cast<double>(i) + 0.5) / static_cast<double>(n_time));
  }
  for (std::size_t i = 0; i < n_cov; ++i) {
    g.cov.push_back(n_cov == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n_cov - 1));
  }
  for (std::size_t i = 0; i < n_freq; ++i) {
    g.freq.push_back((static_cast<double>(i) + 0.5) / (2.0 * static_cast<double>(n_freq)));
  }
  return g;
}

std::size_t time_index(double u, std::size_t length) {
  if (!(u > 0.0 && u <= 1.0)) throw std::invalid_argument("scaled time outside (0, 1]");
  const auto t = static_cast<std::size_t>(std::ceil(u * static_cast<double>(length)));
  return std::clamp<std::size_t>(t, 1, length) - 1;
}

namespace {

void check_grid(const SurfaceGrid& grid) {
  for (double u : grid.time) {
    if (!(u > 0.0 && u <= 1.0)) throw ConfigError("time grid point outside (0, 1]");
  }
  for (double w : grid.cov) {
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("covariate grid point outside [0, 1]");
  }
  for (double nu : grid.freq) {
    if (!(nu > 0.0 && nu < 0.5)) throw ConfigError("frequency grid point outside (0, 1/2)");
  }
}

// Log spectra of every block of one draw on the frequency grid, block-major.
std::vector<double> block_spectra(const ChainState& s, const std::vector<double>& freq) {
  std::vector<double> out;
  out.reserve(s.blocks.size() * freq.size());
  for (const BlockParams& b : s.blocks) {
    const auto v = log_spectrum_eval(b.alpha, b.beta, freq);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

// Fills mean/lower/upper at `offset` for each frequency, given the block
// picked in every draw.
void reduce_point(const std::vector<std::vector<double>>& spectra,
                  const std::vector<std::size_t>& block, std::size_t n_freq, double level,
                  SpectrumSurface& out, std::size_t offset, std::vector<double>& scratch) {
  const double tail = (1.0 - level) / 2.0;
  for (std::size_t k = 0; k < n_freq; ++k) {
    scratch.clear();
    double sum = 0.0;
    for (std::size_t d = 0; d < spectra.size(); ++d) {
      const double v = spectra[d][block[d] * n_freq + k];
      scratch.push_back(v);
      sum += v;
    }
    const double mean = sum / static_cast<double>(scratch.size());
    const double lo = quantile(scratch, tail);
    const double hi = quantile(scratch, 1.0 - tail);
    out.mean_log_f[offset + k] = mean;
    out.lower[offset + k] = std::min(lo, mean);
    out.upper[offset + k] = std::max(hi, mean);
  }
}

}  // namespace

SpectrumSurface spectrum_surface(std::span<const ChainState> chain, std::size_t burn_in,
                                 const SurfaceGrid& grid, double level,
                                 const ModelFilter& filter) {
  check_grid(grid);
  SpectrumSurface out;
  out.grid = grid;
  out.level = clamp_level(level);
  std::vector<const ChainState*> draws;
  for (const ChainState* s : post_burn_in(chain, burn_in)) {
    if (filter.admits(*s)) draws.push_back(s);
  }
  if (draws.empty()) throw std::invalid_argument("no iterations match the model filter");
  out.draws = draws.size();

  std::vector<std::vector<double>> spectra;
  spectra.reserve(draws.size());
  for (const ChainState* s : draws) spectra.push_back(block_spectra(*s, grid.freq));

  const std::size_t n_freq = grid.freq.size();
  const std::size_t total = grid.time.size() * grid.cov.size() * n_freq;
  out.mean_log_f.assign(total, 0.0);
  out.lower.assign(total, 0.0);
  out.upper.assign(total, 0.0);
  std::vector<std::size_t> block(draws.size());
  std::vector<double> scratch;
  for (std::size_t iu = 0; iu < grid.time.size(); ++iu) {
    for (std::size_t iw = 0; iw < grid.cov.size(); ++iw) {
      for (std::size_t d = 0; d < draws.size(); ++d) {
        const ChainState& s = *draws[d];
        const std::size_t j = s.time.segment_of(time_index(grid.time[iu], s.time.length()));
        const std::size_t g = s.cov.segment_of_value(grid.cov[iw]);
        block[d] = j * s.p() + g;
      }
      reduce_point(spectra, block, n_freq, out.level, out, out.index(iu, iw, 0), scratch);
    }
  }
  return out;
}

std::vector<ConditionalSurface> conditional_surfaces(
    std::span<const ChainState> chain, std::size_t burn_in, const std::vector<double>& time_grid,
    const std::vector<double>& freq_grid, double level,
    std::optional<std::pair<std::size_t, std::size_t>> mp) {
  const auto [m, p] = mp ? *mp : model_posterior(chain, burn_in).modal();
  SurfaceGrid grid;
  grid.time = time_grid;
  grid.freq = freq_grid;
  check_grid(grid);

  std::vector<const ChainState*> draws;
  for (const ChainState* s : post_burn_in(chain, burn_in)) {
    if (s->m() == m && s->p() == p) draws.push_back(s);
  }
  if (draws.empty()) throw std::invalid_argument("no iterations at the requested (m, p)");
  std::vector<std::vector<double>> spectra;
  for (const ChainState* s : draws) spectra.push_back(block_spectra(*s, freq_grid));

  std::vector<ConditionalSurface> out;
  const std::size_t n_freq = freq_grid.size();
  std::vector<std::size_t> block(draws.size());
  std::vector<double> scratch;
  for (std::size_t g = 0; g < p; ++g) {
    ConditionalSurface cs;
    cs.m = m;
    cs.p = p;
    cs.cov_segment = g;
    cs.cov_lo = 1.0;
    cs.cov_hi = 0.0;
    for (const ChainState* s : draws) {
      const auto& values = s->cov.distinct_values();
      cs.cov_lo = std::min(cs.cov_lo, values[s->cov.rank_begin(g)]);
      cs.cov_hi = std::max(cs.cov_hi, values[s->cov.rank_end(g) - 1]);
    }
    SpectrumSurface& surf = cs.surface;
    surf.grid = grid;
    surf.level = clamp_level(level);
    surf.draws = draws.size();
    const std::size_t total = time_grid.size() * n_freq;
    surf.mean_log_f.assign(total, 0.0);
    surf.lower.assign(total, 0.0);
    surf.upper.assign(total, 0.0);
    for (std::size_t iu = 0; iu < time_grid.size(); ++iu) {
      for (std::size_t d = 0; d < draws.size(); ++d) {
        const ChainState& s = *draws[d];
        block[d] = s.time.segment_of(time_index(time_grid[iu], s.time.length())) * p + g;
      }
      reduce_point(spectra, block, n_freq, surf.level, surf, iu * n_freq, scratch);
    }
    out.push_back(std::move(cs));
  }
  return out;
}

// ---------------------------------------------------------------- collapsed

void CollapsedConfig::validate() const {
  if (!(sampling_rate > 0.0) || !std::isfinite(sampling_rate)) {
    throw ConfigError("sampling rate must be positive");
  }
  const double nyq = sampling_rate / 2.0;
  if (!(0.0 <= norm.lo && norm.lo <= band.lo && band.lo < band.hi && band.hi <= norm.hi &&
        norm.hi <= nyq)) {
    throw ConfigError("band edges must satisfy 0 <= norm_lo <= band_lo < band_hi <= norm_hi <= " +
                      std::to_string(nyq));
  }
  if (points < 2) throw ConfigError("band integration needs at least two points");
  clamp_level(level);
}

double band_power(double alpha, std::span<const double> beta, Band band, std::size_t points) {
  if (!(band.hi > band.lo)) throw std::invalid_argument("band has zero width");
  if (points < 2) throw std::invalid_argument("band integration needs at least two points");
  const double h = (band.hi - band.lo) / static_cast<double>(points - 1);
  std::vector<double> nu(points);
  for (std::size_t i = 0; i < points; ++i) nu[i] = band.lo + h * static_cast<double>(i);
  nu.back() = band.hi;
  const auto lf = log_spectrum_eval(alpha, beta, nu);
  double sum = 0.5 * (std::exp(lf.front()) + std::exp(lf.back()));
  for (std::size_t i = 1; i + 1 < points; ++i) sum += std::exp(lf[i]);
  return sum * h;
}

double band_ratio(double alpha, std::span<const double> beta, Band band, Band norm,
                  std::size_t points) {
  return band_power(alpha, beta, band, points) / band_power(alpha, beta, norm, points);
}

CollapsedMeasure collapsed_measure(std::span<const ChainState> chain, std::size_t burn_in,
                                   const CollapsedConfig& config,
                                   std::optional<std::pair<std::size_t, std::size_t>> mp) {
  config.validate();
  const auto [m, p] = mp ? *mp : model_posterior(chain, burn_in).modal();
  CollapsedMeasure out;
  out.name = config.name;
  out.band = {config.band.lo / config.sampling_rate, config.band.hi / config.sampling_rate};
  out.norm = {config.norm.lo / config.sampling_rate, config.norm.hi / config.sampling_rate};
  out.sampling_rate = config.sampling_rate;
  out.level = config.level;
  out.m = m;
  out.p = p;

  std::vector<std::vector<double>> values(m * p);
  for (const ChainState* s : post_burn_in(chain, burn_in)) {
    if (s->m() != m || s->p() != p) continue;
    ++out.draws;
    for (std::size_t i = 0; i < s->blocks.size(); ++i) {
      const BlockParams& b = s->blocks[i];
      values[i].push_back(band_ratio(b.alpha, b.beta, out.band, out.norm, config.points));
    }
  }
  if (out.draws == 0) throw std::invalid_argument("no iterations at the requested (m, p)");
  const double tail = (1.0 - config.level) / 2.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    BlockMeasure bm;
    bm.time_segment = i / p;
    bm.cov_segment = i % p;
    double sum = 0.0;
    for (double v : values[i]) sum += v;
    bm.mean = sum / static_cast<double>(values[i].size());
    bm.lower = quantile(values[i], tail);
    bm.upper = quantile(values[i], 1.0 - tail);
    out.blocks.push_back(bm);
  }
  return out;
}

std::string format_estimate(double mean, double lower, double upper, int decimals) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.*f (%.*f, %.*f)", decimals, mean, decimals, lower, decimals,
                upper);
  return buf;
}

std::string format_collapsed(const CollapsedMeasure& measure, int decimals) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%s: band [%g, %g] over [%g, %g] cycles/sample, sampling rate %g, m=%zu p=%zu, "
                "%zu draws, %g%% intervals\n",
                measure.name.c_str(), measure.band.lo, measure.band.hi, measure.norm.lo,
                measure.norm.hi, measure.sampling_rate, measure.m, measure.p, measure.draws,
                100.0 * measure.level);
  out += buf;
  for (const BlockMeasure& b : measure.blocks) {
    std::snprintf(buf, sizeof buf, "time segment %zu, covariate segment %zu: ", b.time_segment + 1,
                  b.cov_segment + 1);
    out += buf;
    out += format_estimate(b.mean, b.lower, b.upper, decimals);
    out += '\n';
  }
  return out;
}

}  // namespace covspec
