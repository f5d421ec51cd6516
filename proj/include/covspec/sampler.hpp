#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "covspec/data_model.hpp"
#include "covspec/partition.hpp"
#include "covspec/rng.hpp"
#include "covspec/spectral.hpp"
#include "covspec/spline_basis.hpp"
#include "covspec/whittle.hpp"

namespace covspec {

struct SamplerConfig {
  std::size_t iterations = 10000;
  std::size_t burn_in = 2000;
  std::size_t t_min = 40;
  std::size_t w_min = 2;
  std::size_t max_time_segments = 10;
  std::size_t max_cov_segments = 10;
  std::size_t num_basis = 7;
  double sigma2_alpha = 100.0;
  double pi_time = 0.2;
  double pi_cov = 0.2;
  std::uint64_t seed = 1;

  Tau2Prior tau2_prior = Tau2Prior::Uniform;
  /// Upper end of the tau2 prior support.
  double tau2_max = 1e4;
  /// Fourier ordinates entering each block likelihood.
  FrequencyRule frequency_rule = FrequencyRule::Complete;
  /// Drop the likelihood: the chain then targets the prior.
  bool prior_only = false;
  /// Include the cut-relocation proposal densities in within-model ratios.
  bool relocation_density_in_ratio = true;
  /// Within-model moves per axis per iteration. Each is a valid kernel on its
  /// own, so repeating them only speeds up cut relocation.
  std::size_t within_sweeps = 1;
  /// Add the pair-shift move: two adjacent time cuts translated together by
  /// a symmetric random offset of at most t_min.
  bool pair_shift = true;
  /// Recompute cached block log-likelihoods every this many iterations and
  /// throw std::logic_error on a mismatch; 0 disables.
  std::size_t audit_interval = 0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// validate(), then throws DataError when the data cannot support these
  /// constraints (T < 2 t_min, fewer distinct covariates than w_min).
  void validate_for(const TimeSeriesSet& data) const;
};

/// Full sampler state. Blocks are stored time-major: block (j, g) sits at
/// index j * p + g.
struct ChainState {
  TimePartition time;
  CovariatePartition cov;
  std::vector<BlockParams> blocks;
  std::vector<double> loglik;  // cached block_log_whittle per block
  std::size_t iteration = 0;

  std::size_t m() const { return time.num_segments(); }
  std::size_t p() const { return cov.num_segments(); }
  BlockParams& block(std::size_t j, std::size_t g) { return blocks[j * p() + g]; }
  const BlockParams& block(std::size_t j, std::size_t g) const { return blocks[j * p() + g]; }
};

enum class Axis { Time, Covariate };

enum class MoveKind : std::size_t {
  TimeBetween = 0,
  TimeWithin = 1,
  CovBetween = 2,
  CovWithin = 3,
  Refresh = 4,
  TimePairShift = 5,
};
inline constexpr std::size_t kNumMoveKinds = 6;
const char* move_name(MoveKind kind);

struct MoveCounts {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  /// Proposals rejected because a Laplace approximation failed.
  std::size_t laplace_failures = 0;

  double rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

struct MoveStats {
  std::array<MoveCounts, kNumMoveKinds> counts{};
  MoveCounts births, deaths;

  MoveCounts& operator[](MoveKind k) { return counts[static_cast<std::size_t>(k)]; }
  const MoveCounts& operator[](MoveKind k) const { return counts[static_cast<std::size_t>(k)]; }
};

/// Outcome of a single move.
struct MoveResult {
  bool proposed = false;
  bool accepted = false;
  bool birth = false;
  bool laplace_failed = false;
  double log_ratio = 0.0;
};

/// Coefficient proposal for one block: the draw plus its log density under
/// the Laplace approximation it came from.
struct CoefficientDraw {
  Eigen::VectorXd theta;
  double log_density = 0.0;
};

/// The reversible-jump engine for one chain over one dataset. Holds caches of
/// local periodograms and bases; not thread-safe, so use one per thread.
class Sampler {
 public:
  /// Validates `config` against `data` (see SamplerConfig::validate_for).
  Sampler(const TimeSeriesSet& data, SamplerConfig config);

  const SamplerConfig& config() const { return config_; }
  const TimeSeriesSet& data() const { return *data_; }

  /// m = p = 1, alpha from the mean log periodogram plus 0.57722, beta = 0,
  /// tau2 = 1.
  ChainState initial_state() const;

  /// Data for block (j, g) under the given partitions.
  BlockData block_data(const TimePartition& time, const CovariatePartition& cov, std::size_t j,
                       std::size_t g) const;

  /// Builds a state from partitions and parameters, filling the likelihood
  /// cache. Throws std::invalid_argument on size mismatch.
  ChainState make_state(TimePartition time, CovariatePartition cov,
                        std::vector<BlockParams> blocks) const;

  double block_loglik(const ChainState& s, std::size_t j, std::size_t g) const;

  /// Log of the full joint density (likelihood, coefficient and tau2
  /// priors, partition priors, segment-count priors).
  double log_joint(const ChainState& s) const;

  /// Partition and segment-count prior of one axis.
  double log_axis_prior(const ChainState& s, Axis axis) const;

  /// Probability of proposing a birth on `axis` from state `s`.
  double birth_probability(const ChainState& s, Axis axis) const;
  /// Probability of proposing a death on `axis` from state `s`.
  double death_probability(const ChainState& s, Axis axis) const;
  /// Indices of the segments on `axis` that are large enough to split.
  std::vector<std::size_t> splittable_segments(const ChainState& s, Axis axis) const;
  /// Admissible positions [lo, hi] for a new cut inside segment k.
  std::pair<std::size_t, std::size_t> birth_range(const ChainState& s, Axis axis,
                                                  std::size_t k) const;

  /// Log acceptance ratio of splitting segment k of `coarse` into segments k
  /// and k+1 of `fine`. `log_q_children` is the summed proposal log density
  /// of the coefficients of the new blocks, `log_q_parent` that of the
  /// coarse blocks under the reverse (merge) proposal. The matching merge
  /// has log ratio equal to minus this value.
  double split_log_ratio(const ChainState& coarse, const ChainState& fine, Axis axis,
                         std::size_t k, double log_q_children, double log_q_parent) const;

  /// Log acceptance ratio of moving cut k (so blocks k and k+1 on `axis`
  /// change), given the coefficient proposal densities of the new blocks and
  /// of the current blocks under the reverse proposal, and the relocation
  /// kernel densities.
  double within_log_ratio(const ChainState& current, const ChainState& proposed, Axis axis,
                          std::size_t k, double log_q_forward, double log_q_reverse,
                          double log_reloc_forward, double log_reloc_reverse) const;

  /// Laplace proposal draw for `data` at `tau2`; nullopt on failure.
  std::optional<CoefficientDraw> propose_coefficients(const BlockData& data, double tau2,
                                                      Rng& rng) const;
  /// Log density of `theta` under the Laplace proposal for `data` at
  /// `tau2`; nullopt on failure.
  std::optional<double> proposal_log_density(const BlockData& data, double tau2,
                                             const Eigen::VectorXd& theta) const;

  MoveResult move_between(ChainState& s, Axis axis, Rng& rng);
  MoveResult move_within(ChainState& s, Axis axis, Rng& rng);
  /// Coefficient M-H update plus Gibbs tau2 for the single block; only runs
  /// when m = p = 1, where no within-model move touches the block.
  MoveResult move_refresh(ChainState& s, Rng& rng);
  /// Shifts time cuts k and k+1 by the same offset, re-proposing the blocks
  /// of segments k, k+1 and k+2. Needs m >= 3.
  MoveResult move_pair_shift(ChainState& s, Rng& rng);

  /// One full iteration: time between, time within, covariate between,
  /// covariate within, the refresh step, then the pair shift. Each move draws from its own
  /// sub-stream of (seed, iteration).
  void iterate(ChainState& s, MoveStats& stats);

  /// Throws std::logic_error when a cached block log-likelihood differs from
  /// recomputation by more than 1e-8 (relative).
  void audit(const ChainState& s) const;

 private:
  struct SegmentPeriodograms {
    FourierGrid grid;
    std::vector<std::vector<double>> values;  // per subject
    std::vector<double> nyquist;              // per subject
    std::vector<double> zero;                 // per subject
  };

  const SegmentPeriodograms& segment_periodograms_cached(std::size_t begin,
                                                         std::size_t end) const;
  std::shared_ptr<const BasisMatrix> basis_for(std::size_t segment_length) const;
  double log_tau2(double tau2) const;

  const TimeSeriesSet* data_;
  SamplerConfig config_;
  PenaltyMatrix penalty_;
  std::vector<std::vector<std::size_t>> subjects_by_rank_;

  mutable std::map<std::pair<std::size_t, std::size_t>, SegmentPeriodograms> periodogram_cache_;
  mutable std::size_t periodogram_cache_doubles_ = 0;
  mutable std::map<std::size_t, std::shared_ptr<const BasisMatrix>> basis_cache_;
};

using ChainObserver = std::function<void(const ChainState&)>;

/// Runs iterations 1..config.iterations from the initial state, calling
/// `observer` on the initial state and after every iteration.
MoveStats run_chain(const TimeSeriesSet& data, const SamplerConfig& config,
                    const ChainObserver& observer);

struct ChainRun {
  std::vector<ChainState> states;  // initial state first, then one per iteration
  MoveStats stats;
};

ChainRun run_chain(const TimeSeriesSet& data, const SamplerConfig& config);

}  // namespace covspec
