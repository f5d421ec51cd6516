#include "covspec/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "covspec/error.hpp"
#include "covspec/spectral.hpp"

namespace covspec {

namespace {

constexpr double kLogPeriodogramBias = 0.57722;
// Periodogram cache limit, in doubles (about 128 MB).
constexpr std::size_t kPeriodogramCacheLimit = std::size_t{16} << 20;

std::size_t num_segments(const ChainState& s, Axis axis) {
  return axis == Axis::Time ? s.m() : s.p();
}

std::size_t num_other(const ChainState& s, Axis axis) {
  return axis == Axis::Time ? s.p() : s.m();
}

// Index into ChainState::blocks of segment `seg` on `axis` and segment `o`
// on the other axis.
std::size_t block_index(const ChainState& s, Axis axis, std::size_t seg, std::size_t o) {
  return axis == Axis::Time ? seg * s.p() + o : o * s.p() + seg;
}

std::size_t segment_size(const ChainState& s, Axis axis, std::size_t k) {
  return axis == Axis::Time ? s.time.segment_length(k) : s.cov.distinct_count(k);
}

// Copy of `s` with new partitions; segment k on `axis` was split (delta = 1),
// merged with k+1 (delta = -1) or had its right cut moved (delta = 0). Blocks
// not touched keep their parameters and cached likelihood; touched blocks are
// seeded from a neighbour and must be overwritten by the caller.
ChainState relayout(const ChainState& s, TimePartition time, CovariatePartition cov, Axis axis,
                    std::size_t k, int delta) {
  ChainState out;
  out.time = std::move(time);
  out.cov = std::move(cov);
  out.iteration = s.iteration;
  const std::size_t n_new = num_segments(out, axis);
  const std::size_t n_other = num_other(out, axis);
  out.blocks.resize(out.m() * out.p());
  out.loglik.assign(out.blocks.size(), 0.0);
  for (std::size_t seg = 0; seg < n_new; ++seg) {
    std::size_t old = seg;
    if (delta > 0 && seg > k) old = seg - 1;
    if (delta < 0 && seg > k) old = seg + 1;
    for (std::size_t o = 0; o < n_other; ++o) {
      const std::size_t from = block_index(s, axis, old, o);
      const std::size_t to = block_index(out, axis, seg, o);
      out.blocks[to] = s.blocks[from];
      out.loglik[to] = s.loglik[from];
    }
  }
  return out;
}

bool accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(rng.uniform_open()) < log_ratio;
}

}  // namespace

const char* move_name(MoveKind kind) {
  switch (kind) {
    case MoveKind::TimeBetween: return "time_between";
    case MoveKind::TimeWithin: return "time_within";
    case MoveKind::CovBetween: return "cov_between";
    case MoveKind::CovWithin: return "cov_within";
    case MoveKind::Refresh: return "refresh";
    case MoveKind::TimePairShift: return "time_pair_shift";
  }
  return "unknown";
}

// ------------------------------------------------------------------- config

void SamplerConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(burn_in < iterations || (iterations == 0 && burn_in == 0))) {
    fail("burn-in (" + std::to_string(burn_in) + ") must be smaller than iterations (" +
         std::to_string(iterations) + ")");
  }
  if (t_min < 4) fail("t_min must be at least 4 (a segment needs one Fourier frequency)");
  if (w_min < 1) fail("w_min must be at least 1");
  if (max_time_segments < 1) fail("maximum number of time segments must be at least 1");
  if (max_cov_segments < 1) fail("maximum number of covariate segments must be at least 1");
  if (num_basis < 1) fail("number of basis functions must be at least 1");
  if (tau2_prior == Tau2Prior::Uniform && num_basis < 3) {
    fail("number of basis functions must be at least 3 for the tau2 update");
  }
  if (!(sigma2_alpha > 0.0) || !std::isfinite(sigma2_alpha)) fail("sigma2_alpha must be positive");
  if (!(pi_time >= 0.0 && pi_time <= 1.0)) fail("pi_time must lie in [0, 1]");
  if (!(pi_cov >= 0.0 && pi_cov <= 1.0)) fail("pi_cov must lie in [0, 1]");
  if (!(tau2_max > 0.0)) fail("tau2_max must be positive");
  if (within_sweeps < 1) fail("within_sweeps must be at least 1");
}

void SamplerConfig::validate_for(const TimeSeriesSet& data) const {
  validate();
  if (data.length() < 2 * t_min) {
    throw DataError("series length T=" + std::to_string(data.length()) +
                    " is below 2*t_min=" + std::to_string(2 * t_min));
  }
  if (data.distinct_covariates().size() < w_min) {
    throw DataError("only " + std::to_string(data.distinct_covariates().size()) +
                    " distinct covariate values, fewer than w_min=" + std::to_string(w_min));
  }
}

// ------------------------------------------------------------------ sampler

Sampler::Sampler(const TimeSeriesSet& data, SamplerConfig config)
    : data_(&data), config_(config), penalty_(config.num_basis) {
  config_.validate_for(data);
  subjects_by_rank_.resize(data.distinct_covariates().size());
  for (std::size_t l = 0; l < data.num_subjects(); ++l) {
    subjects_by_rank_[data.covariate_rank(l)].push_back(l);
  }
}

const Sampler::SegmentPeriodograms& Sampler::segment_periodograms_cached(std::size_t begin,
                                                                         std::size_t end) const {
  const auto key = std::make_pair(begin, end);
  if (auto it = periodogram_cache_.find(key); it != periodogram_cache_.end()) return it->second;
  if (periodogram_cache_doubles_ > kPeriodogramCacheLimit) {
    periodogram_cache_.clear();
    periodogram_cache_doubles_ = 0;
  }
  std::vector<Periodogram> pgs = segment_periodograms(*data_, begin, end, config_.frequency_rule);
  SegmentPeriodograms entry;
  entry.grid = pgs.front().grid;
  entry.values.reserve(pgs.size());
  for (auto& pg : pgs) {
    entry.values.push_back(std::move(pg.values));
    entry.nyquist.push_back(pg.nyquist_value);
    entry.zero.push_back(pg.zero_value);
  }
  periodogram_cache_doubles_ += entry.grid.n * entry.values.size();
  return periodogram_cache_.emplace(key, std::move(entry)).first->second;
}

std::shared_ptr<const BasisMatrix> Sampler::basis_for(std::size_t segment_length) const {
  auto& slot = basis_cache_[segment_length];
  if (!slot) {
    slot = std::make_shared<const BasisMatrix>(
        build_basis(fourier_grid(segment_length, config_.frequency_rule), config_.num_basis));
  }
  return slot;
}

double Sampler::log_tau2(double tau2) const {
  return log_tau2_prior(tau2, config_.tau2_prior, config_.tau2_max);
}

BlockData Sampler::block_data(const TimePartition& time, const CovariatePartition& cov,
                              std::size_t j, std::size_t g) const {
  if (config_.prior_only) return BlockData::prior_only(config_.num_basis);
  const SegmentPeriodograms& seg = segment_periodograms_cached(time.begin(j), time.end(j));
  std::vector<double> sum(seg.grid.n, 0.0);
  double nyquist = 0.0;
  double zero = 0.0;
  std::size_t count = 0;
  for (std::size_t r = cov.rank_begin(g); r < cov.rank_end(g); ++r) {
    for (std::size_t l : subjects_by_rank_[r]) {
      const std::vector<double>& y = seg.values[l];
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += y[k];
      nyquist += seg.nyquist[l];
      zero += seg.zero[l];
      ++count;
    }
  }
  return BlockData(std::move(sum), count, basis_for(seg.grid.segment_length),
                   seg.grid.nyquist ? std::optional<double>(nyquist) : std::nullopt,
                   seg.grid.rule, seg.grid.zero ? std::optional<double>(zero) : std::nullopt);
}

double Sampler::block_loglik(const ChainState& s, std::size_t j, std::size_t g) const {
  return block_log_whittle(s.block(j, g), block_data(s.time, s.cov, j, g));
}

ChainState Sampler::make_state(TimePartition time, CovariatePartition cov,
                               std::vector<BlockParams> blocks) const {
  ChainState s;
  s.time = std::move(time);
  s.cov = std::move(cov);
  if (blocks.size() != s.m() * s.p()) {
    throw std::invalid_argument("make_state: expected " + std::to_string(s.m() * s.p()) +
                                " blocks, got " + std::to_string(blocks.size()));
  }
  for (const BlockParams& b : blocks) {
    if (b.beta.size() != config_.num_basis) {
      throw std::invalid_argument("make_state: block has wrong number of coefficients");
    }
  }
  s.blocks = std::move(blocks);
  s.loglik.resize(s.blocks.size());
  for (std::size_t j = 0; j < s.m(); ++j) {
    for (std::size_t g = 0; g < s.p(); ++g) s.loglik[j * s.p() + g] = block_loglik(s, j, g);
  }
  return s;
}

ChainState Sampler::initial_state() const {
  double sum_log = 0.0;
  std::size_t count = 0;
  for (std::size_t l = 0; l < data_->num_subjects(); ++l) {
    const Periodogram pg = periodogram(demean(data_->series(l)));
    for (double y : pg.values) {
      if (y > 0.0) {
        sum_log += std::log(y);
        ++count;
      }
    }
  }
  BlockParams b;
  b.alpha = count > 0 ? sum_log / static_cast<double>(count) + kLogPeriodogramBias : 0.0;
  b.beta.assign(config_.num_basis, 0.0);
  b.tau2 = 1.0;
  return make_state(TimePartition(data_->length(), {}),
                    CovariatePartition(data_->distinct_covariates(), {}), {b});
}

double Sampler::log_axis_prior(const ChainState& s, Axis axis) const {
  if (axis == Axis::Time) {
    return log_prior_m(s.m(), config_.max_time_segments) +
           log_prior_time_partition(s.time, config_.t_min);
  }
  return log_prior_m(s.p(), config_.max_cov_segments) +
         log_prior_covariate_partition(s.cov, config_.w_min);
}

double Sampler::log_joint(const ChainState& s) const {
  double lp = log_axis_prior(s, Axis::Time) + log_axis_prior(s, Axis::Covariate);
  for (std::size_t i = 0; i < s.blocks.size(); ++i) {
    const BlockParams& b = s.blocks[i];
    lp += s.loglik[i] + log_coefficient_prior(b.theta(), b.tau2, config_.sigma2_alpha) +
          log_tau2(b.tau2);
  }
  return lp;
}

std::vector<std::size_t> Sampler::splittable_segments(const ChainState& s, Axis axis) const {
  const std::size_t need = 2 * (axis == Axis::Time ? config_.t_min : config_.w_min);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < num_segments(s, axis); ++k) {
    if (segment_size(s, axis, k) >= need) out.push_back(k);
  }
  return out;
}

std::pair<std::size_t, std::size_t> Sampler::birth_range(const ChainState& s, Axis axis,
                                                         std::size_t k) const {
  if (axis == Axis::Time) {
    return {s.time.begin(k) + config_.t_min, s.time.end(k) - config_.t_min};
  }
  return {s.cov.rank_begin(k) + config_.w_min - 1, s.cov.rank_end(k) - config_.w_min - 1};
}

double Sampler::birth_probability(const ChainState& s, Axis axis) const {
  const std::size_t n = num_segments(s, axis);
  const std::size_t max_n = axis == Axis::Time ? config_.max_time_segments : config_.max_cov_segments;
  if (n >= max_n || splittable_segments(s, axis).empty()) return 0.0;
  return n == 1 ? 1.0 : 0.5;
}

double Sampler::death_probability(const ChainState& s, Axis axis) const {
  if (num_segments(s, axis) == 1) return 0.0;
  return 1.0 - birth_probability(s, axis);
}

double Sampler::split_log_ratio(const ChainState& coarse, const ChainState& fine, Axis axis,
                                std::size_t k, double log_q_children,
                                double log_q_parent) const {
  double lr = 0.0;
  for (std::size_t o = 0; o < num_other(coarse, axis); ++o) {
    const std::size_t ic = block_index(coarse, axis, k, o);
    const std::size_t ia = block_index(fine, axis, k, o);
    const std::size_t ib = block_index(fine, axis, k + 1, o);
    const BlockParams& c = coarse.blocks[ic];
    const BlockParams& a = fine.blocks[ia];
    const BlockParams& b = fine.blocks[ib];
    lr += fine.loglik[ia] + fine.loglik[ib] - coarse.loglik[ic];
    lr += log_coefficient_prior(a.theta(), a.tau2, config_.sigma2_alpha) +
          log_coefficient_prior(b.theta(), b.tau2, config_.sigma2_alpha) -
          log_coefficient_prior(c.theta(), c.tau2, config_.sigma2_alpha);
    lr += log_tau2(a.tau2) + log_tau2(b.tau2) - log_tau2(c.tau2);
    // |d(tau2_a, tau2_b) / d(tau2_c, u)| = 2 tau2_c / (u (1 - u)), which
    // equals 2 (sqrt(tau2_a) + sqrt(tau2_b))^2.
    const double root_sum = std::sqrt(a.tau2) + std::sqrt(b.tau2);
    lr += std::log(2.0 * root_sum * root_sum);
  }
  lr += log_axis_prior(fine, axis) - log_axis_prior(coarse, axis);
  const auto [lo, hi] = birth_range(coarse, axis, k);
  const double n_split = static_cast<double>(splittable_segments(coarse, axis).size());
  const double n_cuts_fine = static_cast<double>(num_segments(fine, axis) - 1);
  lr += std::log(death_probability(fine, axis)) - std::log(n_cuts_fine);
  lr -= std::log(birth_probability(coarse, axis)) - std::log(n_split) -
        std::log(static_cast<double>(hi - lo + 1));
  lr += log_q_parent - log_q_children;
  return lr;
}

double Sampler::within_log_ratio(const ChainState& current, const ChainState& proposed,
                                 Axis axis, std::size_t k, double log_q_forward,
                                 double log_q_reverse, double log_reloc_forward,
                                 double log_reloc_reverse) const {
  double lr = 0.0;
  for (std::size_t o = 0; o < num_other(current, axis); ++o) {
    for (std::size_t seg : {k, k + 1}) {
      const std::size_t i = block_index(current, axis, seg, o);
      const BlockParams& now = current.blocks[i];
      const BlockParams& next = proposed.blocks[i];
      lr += proposed.loglik[i] - current.loglik[i];
      lr += log_coefficient_prior(next.theta(), next.tau2, config_.sigma2_alpha) -
            log_coefficient_prior(now.theta(), now.tau2, config_.sigma2_alpha);
    }
  }
  lr += log_axis_prior(proposed, axis) - log_axis_prior(current, axis);
  lr += log_q_reverse - log_q_forward;
  if (config_.relocation_density_in_ratio) lr += log_reloc_reverse - log_reloc_forward;
  return lr;
}

std::optional<CoefficientDraw> Sampler::propose_coefficients(const BlockData& data, double tau2,
                                                             Rng& rng) const {
  const LaplaceResult lap =
      laplace_approx(data, tau2, config_.sigma2_alpha, default_laplace_start(data));
  if (!lap.ok()) return std::nullopt;
  CoefficientDraw d;
  d.theta = lap.approx->sample(rng);
  d.log_density = lap.approx->log_density(d.theta);
  return d;
}

std::optional<double> Sampler::proposal_log_density(const BlockData& data, double tau2,
                                                    const Eigen::VectorXd& theta) const {
  const LaplaceResult lap =
      laplace_approx(data, tau2, config_.sigma2_alpha, default_laplace_start(data));
  if (!lap.ok()) return std::nullopt;
  return lap.approx->log_density(theta);
}

MoveResult Sampler::move_between(ChainState& s, Axis axis, Rng& rng) {
  MoveResult r;
  const double pb = birth_probability(s, axis);
  const double pd = death_probability(s, axis);
  if (pb == 0.0 && pd == 0.0) return r;
  r.proposed = true;
  r.birth = rng.uniform() < pb;
  const std::size_t n_other = num_other(s, axis);

  if (r.birth) {
    const std::vector<std::size_t> split = splittable_segments(s, axis);
    const std::size_t k = split[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(split.size()) - 1))];
    const auto [lo, hi] = birth_range(s, axis, k);
    const auto pos = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    ChainState fine =
        axis == Axis::Time
            ? relayout(s, s.time.with_cut_inserted(pos), s.cov, axis, k, 1)
            : relayout(s, s.time, s.cov.with_cut_inserted(pos), axis, k, 1);
    double log_q_children = 0.0;
    double log_q_parent = 0.0;
    for (std::size_t o = 0; o < n_other; ++o) {
      const BlockParams& parent = s.blocks[block_index(s, axis, k, o)];
      const double u = rng.uniform_open();
      const double tau_a = parent.tau2 * u / (1.0 - u);
      const double tau_b = parent.tau2 * (1.0 - u) / u;
      if (!(tau_a <= config_.tau2_max && tau_b <= config_.tau2_max)) return r;
      for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t seg = k + side;
        const std::size_t i = block_index(fine, axis, seg, o);
        const auto [j, g] = axis == Axis::Time ? std::pair{seg, o} : std::pair{o, seg};
        const BlockData bd = block_data(fine.time, fine.cov, j, g);
        const double tau2 = side == 0 ? tau_a : tau_b;
        const auto draw = propose_coefficients(bd, tau2, rng);
        if (!draw) {
          r.laplace_failed = true;
          return r;
        }
        fine.blocks[i].set_theta(draw->theta);
        fine.blocks[i].tau2 = tau2;
        fine.loglik[i] = block_log_whittle(draw->theta, bd);
        log_q_children += draw->log_density;
      }
      const auto [j, g] = axis == Axis::Time ? std::pair{k, o} : std::pair{o, k};
      const auto rev = proposal_log_density(block_data(s.time, s.cov, j, g), parent.tau2,
                                            parent.theta());
      if (!rev) {
        r.laplace_failed = true;
        return r;
      }
      log_q_parent += *rev;
    }
    r.log_ratio = split_log_ratio(s, fine, axis, k, log_q_children, log_q_parent);
    r.accepted = accept(r.log_ratio, rng);
    if (r.accepted) s = std::move(fine);
    return r;
  }

  // Death: merge segments k and k+1.
  const std::size_t n = num_segments(s, axis);
  const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 2));
  ChainState coarse = axis == Axis::Time
                          ? relayout(s, s.time.with_cut_removed(k), s.cov, axis, k, -1)
                          : relayout(s, s.time, s.cov.with_cut_removed(k), axis, k, -1);
  double log_q_children = 0.0;
  double log_q_parent = 0.0;
  for (std::size_t o = 0; o < n_other; ++o) {
    const std::size_t ic = block_index(coarse, axis, k, o);
    const auto [jc, gc] = axis == Axis::Time ? std::pair{k, o} : std::pair{o, k};
    double tau_children[2];
    for (std::size_t side = 0; side < 2; ++side) {
      const std::size_t seg = k + side;
      const BlockParams& child = s.blocks[block_index(s, axis, seg, o)];
      tau_children[side] = child.tau2;
      const auto [j, g] = axis == Axis::Time ? std::pair{seg, o} : std::pair{o, seg};
      const auto rev =
          proposal_log_density(block_data(s.time, s.cov, j, g), child.tau2, child.theta());
      if (!rev) {
        r.laplace_failed = true;
        return r;
      }
      log_q_children += *rev;
    }
    const double tau_c = std::sqrt(tau_children[0] * tau_children[1]);
    const BlockData bd = block_data(coarse.time, coarse.cov, jc, gc);
    const auto draw = propose_coefficients(bd, tau_c, rng);
    if (!draw) {
      r.laplace_failed = true;
      return r;
    }
    coarse.blocks[ic].set_theta(draw->theta);
    coarse.blocks[ic].tau2 = tau_c;
    coarse.loglik[ic] = block_log_whittle(draw->theta, bd);
    log_q_parent += draw->log_density;
  }
  r.log_ratio = -split_log_ratio(coarse, s, axis, k, log_q_children, log_q_parent);
  r.accepted = accept(r.log_ratio, rng);
  if (r.accepted) s = std::move(coarse);
  return r;
}

MoveResult Sampler::move_within(ChainState& s, Axis axis, Rng& rng) {
  MoveResult r;
  const std::size_t n = num_segments(s, axis);
  if (n == 1) return r;
  r.proposed = true;
  const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 2));
  const Relocation reloc =
      axis == Axis::Time
          ? relocation_kernel_time(s.time, k, config_.pi_time, config_.t_min, rng)
          : relocation_kernel_covariate(s.cov, k, config_.pi_cov, config_.w_min, rng);
  ChainState proposed =
      axis == Axis::Time
          ? relayout(s, s.time.with_cut_moved(k, reloc.position), s.cov, axis, k, 0)
          : relayout(s, s.time, s.cov.with_cut_moved(k, reloc.position), axis, k, 0);

  double log_q_forward = 0.0;
  double log_q_reverse = 0.0;
  bool failed = false;
  for (std::size_t o = 0; o < num_other(s, axis) && !failed; ++o) {
    for (std::size_t seg : {k, k + 1}) {
      const std::size_t i = block_index(s, axis, seg, o);
      const auto [j, g] = axis == Axis::Time ? std::pair{seg, o} : std::pair{o, seg};
      const BlockParams& now = s.blocks[i];
      const BlockData bd = block_data(proposed.time, proposed.cov, j, g);
      const auto draw = propose_coefficients(bd, now.tau2, rng);
      const auto rev = proposal_log_density(block_data(s.time, s.cov, j, g), now.tau2, now.theta());
      if (!draw || !rev) {
        failed = true;
        break;
      }
      proposed.blocks[i].set_theta(draw->theta);
      proposed.loglik[i] = block_log_whittle(draw->theta, bd);
      log_q_forward += draw->log_density;
      log_q_reverse += *rev;
    }
  }
  if (failed) {
    r.laplace_failed = true;
  } else {
    r.log_ratio = within_log_ratio(s, proposed, axis, k, log_q_forward, log_q_reverse,
                                   reloc.log_forward, reloc.log_reverse);
    r.accepted = accept(r.log_ratio, rng);
    if (r.accepted) s = std::move(proposed);
  }

  for (std::size_t o = 0; o < num_other(s, axis); ++o) {
    for (std::size_t seg : {k, k + 1}) {
      BlockParams& b = s.blocks[block_index(s, axis, seg, o)];
      b.tau2 = gibbs_tau2(b.beta, penalty_, rng, config_.tau2_prior, config_.tau2_max);
    }
  }
  return r;
}

MoveResult Sampler::move_refresh(ChainState& s, Rng& rng) {
  MoveResult r;
  if (s.m() != 1 || s.p() != 1) return r;
  r.proposed = true;
  BlockParams& b = s.blocks[0];
  const BlockData bd = block_data(s.time, s.cov, 0, 0);
  const LaplaceResult lap =
      laplace_approx(bd, b.tau2, config_.sigma2_alpha, default_laplace_start(bd));
  if (lap.ok()) {
    const Eigen::VectorXd current = b.theta();
    const Eigen::VectorXd next = lap.approx->sample(rng);
    const double next_loglik = block_log_whittle(next, bd);
    r.log_ratio = next_loglik - s.loglik[0] +
                  log_coefficient_prior(next, b.tau2, config_.sigma2_alpha) -
                  log_coefficient_prior(current, b.tau2, config_.sigma2_alpha) +
                  lap.approx->log_density(current) - lap.approx->log_density(next);
    r.accepted = accept(r.log_ratio, rng);
    if (r.accepted) {
      b.set_theta(next);
      s.loglik[0] = next_loglik;
    }
  } else {
    r.laplace_failed = true;
  }
  b.tau2 = gibbs_tau2(b.beta, penalty_, rng, config_.tau2_prior, config_.tau2_max);
  return r;
}

MoveResult Sampler::move_pair_shift(ChainState& s, Rng& rng) {
  MoveResult r;
  if (s.m() < 3) return r;
  r.proposed = true;
  const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(s.m()) - 3));
  const auto span = static_cast<std::int64_t>(config_.t_min);
  std::int64_t delta = rng.uniform_int(1, span);
  if (rng.uniform() < 0.5) delta = -delta;

  std::vector<std::size_t> cuts = s.time.cuts();
  const auto lo = static_cast<std::int64_t>(k == 0 ? 0 : cuts[k - 1]);
  const auto hi = static_cast<std::int64_t>(k + 2 < cuts.size() ? cuts[k + 2] : s.time.length());
  const std::int64_t a = static_cast<std::int64_t>(cuts[k]) + delta;
  const std::int64_t b = static_cast<std::int64_t>(cuts[k + 1]) + delta;
  if (a - lo < span || hi - b < span) return r;
  cuts[k] = static_cast<std::size_t>(a);
  cuts[k + 1] = static_cast<std::size_t>(b);

  ChainState proposed = relayout(s, TimePartition(s.time.length(), cuts), s.cov, Axis::Time, k, 0);
  double lr = log_axis_prior(proposed, Axis::Time) - log_axis_prior(s, Axis::Time);
  for (std::size_t j = k; j <= k + 2; ++j) {
    for (std::size_t g = 0; g < s.p(); ++g) {
      const std::size_t i = j * s.p() + g;
      const BlockParams& now = s.blocks[i];
      const BlockData bd = block_data(proposed.time, proposed.cov, j, g);
      const auto draw = propose_coefficients(bd, now.tau2, rng);
      const auto rev = proposal_log_density(block_data(s.time, s.cov, j, g), now.tau2, now.theta());
      if (!draw || !rev) {
        r.laplace_failed = true;
        return r;
      }
      proposed.blocks[i].set_theta(draw->theta);
      proposed.loglik[i] = block_log_whittle(draw->theta, bd);
      lr += proposed.loglik[i] - s.loglik[i];
      lr += log_coefficient_prior(draw->theta, now.tau2, config_.sigma2_alpha) -
            log_coefficient_prior(now.theta(), now.tau2, config_.sigma2_alpha);
      lr += *rev - draw->log_density;
    }
  }
  r.log_ratio = lr;
  r.accepted = accept(lr, rng);
  if (r.accepted) s = std::move(proposed);
  return r;
}

void Sampler::iterate(ChainState& s, MoveStats& stats) {
  ++s.iteration;
  const std::uint64_t it = s.iteration;
  auto record = [&](MoveKind kind, const MoveResult& r) {
    if (!r.proposed) return;
    MoveCounts& c = stats[kind];
    ++c.proposed;
    if (r.accepted) ++c.accepted;
    if (r.laplace_failed) ++c.laplace_failures;
    if (kind == MoveKind::TimeBetween || kind == MoveKind::CovBetween) {
      MoveCounts& bd = r.birth ? stats.births : stats.deaths;
      ++bd.proposed;
      if (r.accepted) ++bd.accepted;
      if (r.laplace_failed) ++bd.laplace_failures;
    }
  };
  auto stream = [&](MoveKind kind, std::size_t sweep = 0) {
    return Rng::substream(config_.seed, it,
                          static_cast<std::uint64_t>(kind) + sweep * kNumMoveKinds);
  };
  {
    Rng rng = stream(MoveKind::TimeBetween);
    record(MoveKind::TimeBetween, move_between(s, Axis::Time, rng));
  }
  for (std::size_t r = 0; r < config_.within_sweeps; ++r) {
    Rng rng = stream(MoveKind::TimeWithin, r);
    record(MoveKind::TimeWithin, move_within(s, Axis::Time, rng));
  }
  {
    Rng rng = stream(MoveKind::CovBetween);
    record(MoveKind::CovBetween, move_between(s, Axis::Covariate, rng));
  }
  for (std::size_t r = 0; r < config_.within_sweeps; ++r) {
    Rng rng = stream(MoveKind::CovWithin, r);
    record(MoveKind::CovWithin, move_within(s, Axis::Covariate, rng));
  }
  {
    Rng rng = stream(MoveKind::Refresh);
    record(MoveKind::Refresh, move_refresh(s, rng));
  }
  if (config_.pair_shift) {
    Rng rng = stream(MoveKind::TimePairShift);
    record(MoveKind::TimePairShift, move_pair_shift(s, rng));
  }
  if (config_.audit_interval > 0 && it % config_.audit_interval == 0) audit(s);
}

void Sampler::audit(const ChainState& s) const {
  for (std::size_t j = 0; j < s.m(); ++j) {
    for (std::size_t g = 0; g < s.p(); ++g) {
      const double cached = s.loglik[j * s.p() + g];
      const double fresh = block_loglik(s, j, g);
      if (std::abs(cached - fresh) > 1e-8 * std::max(1.0, std::abs(fresh))) {
        throw std::logic_error("cached log-likelihood of block (" + std::to_string(j) + ", " +
                               std::to_string(g) + ") is stale at iteration " +
                               std::to_string(s.iteration));
      }
    }
  }
  if (!s.time.satisfies(config_.t_min, config_.max_time_segments) ||
      !s.cov.satisfies(config_.w_min, config_.max_cov_segments)) {
    throw std::logic_error("partition constraints violated at iteration " +
                           std::to_string(s.iteration));
  }
}

MoveStats run_chain(const TimeSeriesSet& data, const SamplerConfig& config,
                    const ChainObserver& observer) {
  Sampler sampler(data, config);
  ChainState state = sampler.initial_state();
  MoveStats stats;
  if (observer) observer(state);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    sampler.iterate(state, stats);
    if (observer) observer(state);
  }
  return stats;
}

ChainRun run_chain(const TimeSeriesSet& data, const SamplerConfig& config) {
  ChainRun run;
  run.states.reserve(config.iterations + 1);
  run.stats = run_chain(data, config, [&](const ChainState& s) { run.states.push_back(s); });
  return run;
}

}  // namespace covspec
