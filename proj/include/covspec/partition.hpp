#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "covspec/rng.hpp"

namespace covspec {

/// Cut points of the time axis. Cut xi_j is an observation index in 1..T-1;
/// segment j holds observations t with xi_{j-1} < t <= xi_j (1-based), i.e.
/// the 0-based half-open range [xi_{j-1}, xi_j), with xi_0 = 0 and xi_m = T.
class TimePartition {
 public:
  TimePartition() = default;
  /// Throws std::invalid_argument unless cuts are strictly increasing in 1..T-1.
  TimePartition(std::size_t length, std::vector<std::size_t> cuts);

  std::size_t length() const { return length_; }
  std::size_t num_segments() const { return cuts_.size() + 1; }
  const std::vector<std::size_t>& cuts() const { return cuts_; }

  std::size_t begin(std::size_t j) const { return j == 0 ? 0 : cuts_[j - 1]; }
  std::size_t end(std::size_t j) const { return j == cuts_.size() ? length_ : cuts_[j]; }
  std::size_t segment_length(std::size_t j) const { return end(j) - begin(j); }
  /// Segment holding 0-based observation index t.
  std::size_t segment_of(std::size_t t) const;

  bool satisfies(std::size_t t_min, std::size_t max_segments) const;

  TimePartition with_cut_inserted(std::size_t position) const;
  TimePartition with_cut_removed(std::size_t cut_index) const;
  TimePartition with_cut_moved(std::size_t cut_index, std::size_t position) const;

  bool operator==(const TimePartition&) const = default;

 private:
  std::size_t length_ = 0;
  std::vector<std::size_t> cuts_;
};

/// Cut points of the covariate axis, restricted to the lattice of distinct
/// realized covariate values. Cuts are stored as ranks into the sorted
/// distinct values; segment g holds ranks (cut_{g-1}, cut_g], with the first
/// segment starting at rank 0 and the last ending at the largest value.
class CovariatePartition {
 public:
  CovariatePartition() = default;
  /// Throws std::invalid_argument unless ranks are strictly increasing and
  /// below distinct_values.size() - 1.
  CovariatePartition(std::vector<double> distinct_values, std::vector<std::size_t> cut_ranks);

  std::size_t num_segments() const { return cut_ranks_.size() + 1; }
  std::size_t num_distinct() const { return distinct_.size(); }
  const std::vector<double>& distinct_values() const { return distinct_; }
  const std::vector<std::size_t>& cut_ranks() const { return cut_ranks_; }
  std::vector<double> cut_values() const;

  /// First and one-past-last distinct rank in segment g.
  std::size_t rank_begin(std::size_t g) const { return g == 0 ? 0 : cut_ranks_[g - 1] + 1; }
  std::size_t rank_end(std::size_t g) const {
    return g == cut_ranks_.size() ? distinct_.size() : cut_ranks_[g] + 1;
  }
  /// Number of distinct covariate values in segment g (r_g).
  std::size_t distinct_count(std::size_t g) const { return rank_end(g) - rank_begin(g); }
  std::size_t segment_of_rank(std::size_t rank) const;
  /// Segment g with psi_{g-1} < w <= psi_g; values below the minimum go to
  /// the first segment.
  std::size_t segment_of_value(double w) const;

  bool satisfies(std::size_t w_min, std::size_t max_segments) const;

  CovariatePartition with_cut_inserted(std::size_t rank) const;
  CovariatePartition with_cut_removed(std::size_t cut_index) const;
  CovariatePartition with_cut_moved(std::size_t cut_index, std::size_t rank) const;

  bool operator==(const CovariatePartition&) const = default;

 private:
  std::vector<double> distinct_;
  std::vector<std::size_t> cut_ranks_;
};

/// log Pr(m) = -log M for 1 <= m <= M; throws std::out_of_range otherwise.
double log_prior_m(std::size_t m, std::size_t max_segments);

/// Sum over cuts of -log(number of admissible positions for that cut given
/// the previous one), where every segment must keep at least t_min points.
/// Throws std::invalid_argument if the partition violates t_min.
double log_prior_time_partition(const TimePartition& part, std::size_t t_min);

/// Covariate analogue: positions are distinct covariate values and every
/// segment must keep at least w_min of them.
double log_prior_covariate_partition(const CovariatePartition& part, std::size_t w_min);

/// A relocated cut together with the mixture-kernel log densities of the
/// forward move and of the move back.
struct Relocation {
  std::size_t position = 0;  // time index, or distinct-value rank for covariates
  double log_forward = 0.0;
  double log_reverse = 0.0;
};

/// Mixture kernel on the lattice {lo, ..., hi} of admissible positions for a
/// cut currently at `current`: with weight pi_mix uniform over the lattice,
/// otherwise a step of at most one lattice point that never leaves it.
double relocation_log_density(std::size_t lo, std::size_t hi, std::size_t from, std::size_t to,
                              double pi_mix);

Relocation relocation_kernel_time(const TimePartition& current, std::size_t cut_index,
                                  double pi_mix, std::size_t t_min, Rng& rng);

Relocation relocation_kernel_covariate(const CovariatePartition& current, std::size_t cut_index,
                                       double pi_mix, std::size_t w_min, Rng& rng);

}  // namespace covspec
