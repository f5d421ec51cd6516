#include "covspec/partition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace covspec {

// ---------------------------------------------------------------- TimePartition

TimePartition::TimePartition(std::size_t length, std::vector<std::size_t> cuts)
    : length_(length), cuts_(std::move(cuts)) {
  std::size_t prev = 0;
  for (std::size_t c : cuts_) {
    if (c <= prev || c >= length_) {
      throw std::invalid_argument("time cuts must be strictly increasing within 1..T-1");
    }
    prev = c;
  }
}

std::size_t TimePartition::segment_of(std::size_t t) const {
  if (t >= length_) throw std::out_of_range("segment_of: time index beyond T");
  return static_cast<std::size_t>(std::upper_bound(cuts_.begin(), cuts_.end(), t) - cuts_.begin());
}

bool TimePartition::satisfies(std::size_t t_min, std::size_t max_segments) const {
  if (num_segments() > max_segments) return false;
  for (std::size_t j = 0; j < num_segments(); ++j) {
    if (segment_length(j) < t_min) return false;
  }
  return true;
}

TimePartition TimePartition::with_cut_inserted(std::size_t position) const {
  auto cuts = cuts_;
  cuts.insert(std::upper_bound(cuts.begin(), cuts.end(), position), position);
  return TimePartition(length_, std::move(cuts));
}

TimePartition TimePartition::with_cut_removed(std::size_t cut_index) const {
  auto cuts = cuts_;
  cuts.erase(cuts.begin() + static_cast<std::ptrdiff_t>(cut_index));
  return TimePartition(length_, std::move(cuts));
}

TimePartition TimePartition::with_cut_moved(std::size_t cut_index, std::size_t position) const {
  auto cuts = cuts_;
  cuts.at(cut_index) = position;
  return TimePartition(length_, std::move(cuts));
}

// ----------------------------------------------------------- CovariatePartition

CovariatePartition::CovariatePartition(std::vector<double> distinct_values,
                                       std::vector<std::size_t> cut_ranks)
    : distinct_(std::move(distinct_values)), cut_ranks_(std::move(cut_ranks)) {
  if (distinct_.empty()) throw std::invalid_argument("covariate partition needs values");
  if (!std::is_sorted(distinct_.begin(), distinct_.end()) ||
      std::adjacent_find(distinct_.begin(), distinct_.end()) != distinct_.end()) {
    throw std::invalid_argument("distinct covariate values must be strictly increasing");
  }
  std::size_t next_min = 0;
  for (std::size_t r : cut_ranks_) {
    if (r < next_min || r + 1 >= distinct_.size()) {
      throw std::invalid_argument("covariate cut ranks must be increasing and below the maximum");
    }
    next_min = r + 1;
  }
}

std::vector<double> CovariatePartition::cut_values() const {
  std::vector<double> out;
  out.reserve(cut_ranks_.size());
  for (std::size_t r : cut_ranks_) out.push_back(distinct_[r]);
  return out;
}

std::size_t CovariatePartition::segment_of_rank(std::size_t rank) const {
  if (rank >= distinct_.size()) throw std::out_of_range("segment_of_rank: rank out of range");
  return static_cast<std::size_t>(std::lower_bound(cut_ranks_.begin(), cut_ranks_.end(), rank) -
                                  cut_ranks_.begin());
}

std::size_t CovariatePartition::segment_of_value(double w) const {
  std::size_t g = 0;
  while (g < cut_ranks_.size() && w > distinct_[cut_ranks_[g]]) ++g;
  return g;
}

bool CovariatePartition::satisfies(std::size_t w_min, std::size_t max_segments) const {
  if (num_segments() > max_segments) return false;
  for (std::size_t g = 0; g < num_segments(); ++g) {
    if (distinct_count(g) < w_min) return false;
  }
  return true;
}

CovariatePartition CovariatePartition::with_cut_inserted(std::size_t rank) const {
  auto cuts = cut_ranks_;
  cuts.insert(std::upper_bound(cuts.begin(), cuts.end(), rank), rank);
  return CovariatePartition(distinct_, std::move(cuts));
}

CovariatePartition CovariatePartition::with_cut_removed(std::size_t cut_index) const {
  auto cuts = cut_ranks_;
  cuts.erase(cuts.begin() + static_cast<std::ptrdiff_t>(cut_index));
  return CovariatePartition(distinct_, std::move(cuts));
}

CovariatePartition CovariatePartition::with_cut_moved(std::size_t cut_index,
                                                      std::size_t rank) const {
  auto cuts = cut_ranks_;
  cuts.at(cut_index) = rank;
  return CovariatePartition(distinct_, std::move(cuts));
}

// ----------------------------------------------------------------------- priors

double log_prior_m(std::size_t m, std::size_t max_segments) {
  if (m < 1 || m > max_segments) {
    throw std::out_of_range("segment count " + std::to_string(m) + " outside 1.." +
                            std::to_string(max_segments));
  }
  return -std::log(static_cast<double>(max_segments));
}

double log_prior_time_partition(const TimePartition& part, std::size_t t_min) {
  const std::size_t m = part.num_segments();
  if (!part.satisfies(t_min, m)) {
    throw std::invalid_argument("time partition violates the t_min constraint");
  }
  double lp = 0.0;
  const std::size_t length = part.length();
  for (std::size_t j = 1; j < m; ++j) {
    // Cut j lies in [xi_{j-1} + t_min, T - (m - j) t_min].
    const std::size_t prev = part.begin(j - 1);
    const std::size_t count = length - (m - j) * t_min - prev - t_min + 1;
    lp -= std::log(static_cast<double>(count));
  }
  return lp;
}

double log_prior_covariate_partition(const CovariatePartition& part, std::size_t w_min) {
  const std::size_t p = part.num_segments();
  if (!part.satisfies(w_min, p)) {
    throw std::invalid_argument("covariate partition violates the w_min constraint");
  }
  double lp = 0.0;
  const std::size_t total = part.num_distinct();
  for (std::size_t g = 1; g < p; ++g) {
    // Values strictly above the previous cut, minus what the remaining
    // segments and this one need to stay at w_min.
    const std::size_t above_prev = total - part.rank_begin(g - 1);
    const std::size_t count = above_prev - (p - g) * w_min - w_min + 1;
    lp -= std::log(static_cast<double>(count));
  }
  return lp;
}

// ------------------------------------------------------------ relocation kernels

double relocation_log_density(std::size_t lo, std::size_t hi, std::size_t from, std::size_t to,
                              double pi_mix) {
  if (lo > hi || from < lo || from > hi) {
    throw std::invalid_argument("relocation_log_density: current position outside lattice");
  }
  if (to < lo || to > hi) return -INFINITY;
  const double uniform = 1.0 / static_cast<double>(hi - lo + 1);
  double local = 0.0;
  const std::size_t dist = from > to ? from - to : to - from;
  if (dist <= 1) {
    std::size_t reachable = 1;
    if (from > lo) ++reachable;
    if (from < hi) ++reachable;
    local = 1.0 / static_cast<double>(reachable);
  }
  return std::log(pi_mix * uniform + (1.0 - pi_mix) * local);
}

namespace {

Relocation relocate_on_lattice(std::size_t lo, std::size_t hi, std::size_t current,
                               double pi_mix, Rng& rng) {
  std::size_t proposed;
  if (rng.uniform() < pi_mix) {
    proposed = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
  } else {
    std::vector<std::size_t> reachable;
    if (current > lo) reachable.push_back(current - 1);
    reachable.push_back(current);
    if (current < hi) reachable.push_back(current + 1);
    proposed = reachable[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(reachable.size()) - 1))];
  }
  return {proposed, relocation_log_density(lo, hi, current, proposed, pi_mix),
          relocation_log_density(lo, hi, proposed, current, pi_mix)};
}

}  // namespace

Relocation relocation_kernel_time(const TimePartition& current, std::size_t cut_index,
                                  double pi_mix, std::size_t t_min, Rng& rng) {
  if (cut_index + 1 >= current.num_segments()) {
    throw std::invalid_argument("relocation_kernel_time: no such cut");
  }
  const std::size_t lo = current.begin(cut_index) + t_min;
  const std::size_t hi = current.end(cut_index + 1) - t_min;
  return relocate_on_lattice(lo, hi, current.cuts()[cut_index], pi_mix, rng);
}

Relocation relocation_kernel_covariate(const CovariatePartition& current, std::size_t cut_index,
                                       double pi_mix, std::size_t w_min, Rng& rng) {
  if (cut_index + 1 >= current.num_segments()) {
    throw std::invalid_argument("relocation_kernel_covariate: no such cut");
  }
  const std::size_t lo = current.rank_begin(cut_index) + w_min - 1;
  const std::size_t hi = current.rank_end(cut_index + 1) - 1 - w_min;
  return relocate_on_lattice(lo, hi, current.cut_ranks()[cut_index], pi_mix, rng);
}

}  // namespace covspec
