#include "covspec/data_model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "covspec/error.hpp"

namespace covspec {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_cell(std::string_view cell, const std::string& where) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw DataError("non-numeric cell '" + std::string(cell) + "' at " + where);
  }
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

TimeSeriesSet::TimeSeriesSet(std::vector<std::vector<double>> series,
                             std::vector<double> raw_covariates,
                             std::vector<std::string> subject_ids, std::size_t min_length)
    : series_(std::move(series)),
      raw_covariates_(std::move(raw_covariates)),
      subject_ids_(std::move(subject_ids)) {
  const std::size_t num = series_.size();
  if (num < 2) {
    throw DataError("need at least two subjects to rescale covariates, got " +
                    std::to_string(num));
  }
  if (raw_covariates_.size() != num) {
    throw DataError("series has " + std::to_string(num) + " subjects but " +
                    std::to_string(raw_covariates_.size()) + " covariates were given");
  }
  const std::size_t length = series_.front().size();
  for (std::size_t l = 0; l < num; ++l) {
    if (series_[l].size() != length) {
      throw DataError("ragged series: row " + std::to_string(l + 1) + " has " +
                      std::to_string(series_[l].size()) + " values, row 1 has " +
                      std::to_string(length));
    }
    for (std::size_t t = 0; t < length; ++t) {
      if (!std::isfinite(series_[l][t])) {
        throw DataError("non-finite value at row " + std::to_string(l + 1) + ", column " +
                        std::to_string(t + 1));
      }
    }
  }
  if (length < std::max<std::size_t>(min_length, 4)) {
    throw DataError("series length T=" + std::to_string(length) +
                    " is shorter than the required minimum " +
                    std::to_string(std::max<std::size_t>(min_length, 4)) + " (2 * t_min)");
  }
  for (double w : raw_covariates_) {
    if (!std::isfinite(w)) throw DataError("non-finite covariate value");
  }
  const auto [lo_it, hi_it] = std::minmax_element(raw_covariates_.begin(), raw_covariates_.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw DataError("degenerate covariate: all values equal");

  covariates_.resize(num);
  for (std::size_t l = 0; l < num; ++l) {
    covariates_[l] = (raw_covariates_[l] - lo) / (hi - lo);
  }
  // Pin the extremes exactly; the division can leave 1 - eps for the max.
  covariates_[lo_it - raw_covariates_.begin()] = 0.0;
  covariates_[hi_it - raw_covariates_.begin()] = 1.0;
  for (std::size_t l = 0; l < num; ++l) {
    if (raw_covariates_[l] == lo) covariates_[l] = 0.0;
    if (raw_covariates_[l] == hi) covariates_[l] = 1.0;
  }

  distinct_ = covariates_;
  std::sort(distinct_.begin(), distinct_.end());
  distinct_.erase(std::unique(distinct_.begin(), distinct_.end()), distinct_.end());
  ranks_.resize(num);
  for (std::size_t l = 0; l < num; ++l) {
    ranks_[l] = static_cast<std::size_t>(
        std::lower_bound(distinct_.begin(), distinct_.end(), covariates_[l]) - distinct_.begin());
  }

  if (subject_ids_.empty()) {
    for (std::size_t l = 0; l < num; ++l) subject_ids_.push_back("s" + std::to_string(l + 1));
  } else if (subject_ids_.size() != num) {
    throw DataError("subject id count does not match number of series");
  }
}

TimeSeriesSet load_dataset(const std::filesystem::path& series_path,
                           const std::filesystem::path& covariate_path, std::size_t min_length) {
  std::vector<std::vector<double>> rows;
  {
    auto in = open_input(series_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string_view view = trim(line);
      if (view.empty() || view.front() == '#') continue;
      std::vector<double> row;
      std::size_t col = 0;
      std::size_t start = 0;
      while (true) {
        const std::size_t comma = view.find(',', start);
        const std::string_view cell =
            view.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                : comma - start);
        ++col;
        row.push_back(parse_cell(cell, series_path.filename().string() + " line " +
                                           std::to_string(line_no) + " column " +
                                           std::to_string(col)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      rows.push_back(std::move(row));
    }
  }
  std::vector<double> covariates;
  {
    auto in = open_input(covariate_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string_view view = trim(line);
      if (view.empty() || view.front() == '#') continue;
      covariates.push_back(
          parse_cell(view, covariate_path.filename().string() + " line " + std::to_string(line_no)));
    }
  }
  if (rows.empty()) throw DataError("series file " + series_path.string() + " has no rows");
  return TimeSeriesSet(std::move(rows), std::move(covariates), {}, min_length);
}

void write_dataset(const TimeSeriesSet& data, const std::filesystem::path& series_path,
                   const std::filesystem::path& covariate_path, const std::string& header) {
  auto format = [](double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                   std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
  };
  {
    std::ofstream out(series_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + series_path.string());
    if (!header.empty()) out << "# " << header << '\n';
    for (std::size_t l = 0; l < data.num_subjects(); ++l) {
      const auto row = data.series(l);
      for (std::size_t t = 0; t < row.size(); ++t) {
        if (t) out << ',';
        out << format(row[t]);
      }
      out << '\n';
    }
    if (!out) throw IoError("write failed for " + series_path.string());
  }
  {
    std::ofstream out(covariate_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + covariate_path.string());
    if (!header.empty()) out << "# " << header << '\n';
    for (double w : data.raw_covariates()) out << format(w) << '\n';
    if (!out) throw IoError("write failed for " + covariate_path.string());
  }
}

std::vector<double> demean(std::span<const double> segment) {
  if (segment.empty()) throw std::invalid_argument("demean: empty segment");
  const double mean =
      std::accumulate(segment.begin(), segment.end(), 0.0) / static_cast<double>(segment.size());
  std::vector<double> out(segment.begin(), segment.end());
  for (double& x : out) x -= mean;
  return out;
}

}  // namespace covspec
