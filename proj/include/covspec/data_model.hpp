#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace covspec {

/// Replicated series sharing a common length, one scalar covariate per series.
///
/// Row l of `series` is subject l. Covariates are min-max rescaled to [0, 1]
/// at construction; the raw values are kept for reporting. Immutable once
/// built.
class TimeSeriesSet {
 public:
  /// Validates and rescales. `min_length` is the smallest admissible T
  /// (callers pass 2 * t_min). Throws DataError on ragged rows, L mismatch,
  /// non-finite values, fewer than two subjects, identical covariates, or
  /// T < min_length.
  TimeSeriesSet(std::vector<std::vector<double>> series, std::vector<double> raw_covariates,
                std::vector<std::string> subject_ids = {}, std::size_t min_length = 4);

  std::size_t num_subjects() const { return series_.size(); }
  std::size_t length() const { return series_.front().size(); }

  std::span<const double> series(std::size_t subject) const { return series_[subject]; }
  const std::vector<std::vector<double>>& all_series() const { return series_; }

  double covariate(std::size_t subject) const { return covariates_[subject]; }
  const std::vector<double>& covariates() const { return covariates_; }
  const std::vector<double>& raw_covariates() const { return raw_covariates_; }
  const std::vector<std::string>& subject_ids() const { return subject_ids_; }

  /// Sorted distinct rescaled covariate values.
  const std::vector<double>& distinct_covariates() const { return distinct_; }
  /// Index into distinct_covariates() for each subject.
  std::size_t covariate_rank(std::size_t subject) const { return ranks_[subject]; }

 private:
  std::vector<std::vector<double>> series_;
  std::vector<double> covariates_;
  std::vector<double> raw_covariates_;
  std::vector<std::string> subject_ids_;
  std::vector<double> distinct_;
  std::vector<std::size_t> ranks_;
};

/// Reads a numeric CSV (one row per subject, no header) and a covariate file
/// (one value per line). LF and CRLF line endings are accepted; blank lines
/// and lines starting with '#' are ignored.
TimeSeriesSet load_dataset(const std::filesystem::path& series_path,
                           const std::filesystem::path& covariate_path,
                           std::size_t min_length = 4);

/// Writes the series CSV and covariate file with 17 significant digits, so a
/// subsequent load reproduces every value exactly. A non-empty `header` is
/// written first as a '#' comment line in both files.
void write_dataset(const TimeSeriesSet& data, const std::filesystem::path& series_path,
                   const std::filesystem::path& covariate_path, const std::string& header = {});

/// Subtracts the sample mean. Throws std::invalid_argument on empty input.
std::vector<double> demean(std::span<const double> segment);

}  // namespace covspec
