#include "covspec/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "covspec/data_model.hpp"
#include "covspec/partition.hpp"

namespace covspec {

namespace {

// FFTW planning is not thread-safe; execution with new-array execute is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [len, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t length) {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(length); it != plans_.end()) return it->second;
    std::vector<double> in(length);
    std::vector<std::complex<double>> out(length / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(length), in.data(),
                                          reinterpret_cast<fftw_complex*>(out.data()),
                                          FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_PRESERVE_INPUT);
    if (plan == nullptr) throw std::runtime_error("FFTW planning failed");
    plans_.emplace(length, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

std::vector<double> power_spectrum(std::span<const double> x, std::size_t count) {
  const std::size_t length = x.size();
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("periodogram: non-finite input");
  }
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(length / 2 + 1);
  fftw_execute_dft_r2c(plan_cache().get(length), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  std::vector<double> power(count);
  const double inv_len = 1.0 / static_cast<double>(length);
  for (std::size_t k = 0; k < count; ++k) power[k] = std::norm(out[k]) * inv_len;
  return power;
}

}  // namespace

FourierGrid fourier_grid(std::size_t segment_length, FrequencyRule rule) {
  if (segment_length < 4) {
    throw std::invalid_argument("fourier_grid: segment length " + std::to_string(segment_length) +
                                " leaves no interior Fourier frequency (need >= 4)");
  }
  FourierGrid grid;
  grid.segment_length = segment_length;
  grid.rule = rule;
  if (rule == FrequencyRule::Standard) {
    grid.n = segment_length / 2 - 1;
  } else {
    grid.n = (segment_length - 1) / 2;
    grid.nyquist = segment_length % 2 == 0;
    grid.zero = true;
  }
  grid.frequencies.resize(grid.n);
  for (std::size_t k = 1; k <= grid.n; ++k) {
    grid.frequencies[k - 1] = static_cast<double>(k) / static_cast<double>(segment_length);
  }
  return grid;
}

Periodogram periodogram(std::span<const double> segment, FrequencyRule rule) {
  Periodogram out;
  out.grid = fourier_grid(segment.size(), rule);
  const auto full = power_spectrum(segment, segment.size() / 2 + 1);
  out.values.assign(full.begin() + 1, full.begin() + 1 + static_cast<std::ptrdiff_t>(out.grid.n));
  if (out.grid.nyquist) out.nyquist_value = full.back();
  if (out.grid.zero) out.zero_value = full.front();
  return out;
}

std::vector<double> full_periodogram(std::span<const double> segment) {
  if (segment.empty()) throw std::invalid_argument("full_periodogram: empty segment");
  return power_spectrum(segment, segment.size() / 2 + 1);
}

std::vector<Periodogram> segment_periodograms(const TimeSeriesSet& data, std::size_t begin,
                                              std::size_t end, FrequencyRule rule) {
  if (end > data.length() || begin >= end) {
    throw std::invalid_argument("segment_periodograms: bad range");
  }
  if (end - begin < 4) {
    throw std::invalid_argument("segment_periodograms: segment shorter than 4 observations");
  }
  std::vector<Periodogram> out;
  out.reserve(data.num_subjects());
  for (std::size_t l = 0; l < data.num_subjects(); ++l) {
    const auto full = data.series(l);
    const auto x = full.subspan(begin, end - begin);
    out.push_back(periodogram(demean(x), rule));
    if (out.back().grid.zero) {
      const double len = static_cast<double>(x.size());
      const double shift = std::accumulate(x.begin(), x.end(), 0.0) / len -
                           std::accumulate(full.begin(), full.end(), 0.0) /
                               static_cast<double>(full.size());
      out.back().zero_value = len * shift * shift;
    }
  }
  return out;
}

std::vector<std::vector<Periodogram>> local_periodograms(const TimeSeriesSet& data,
                                                         const TimePartition& part,
                                                         FrequencyRule rule) {
  if (part.length() != data.length()) {
    throw std::invalid_argument("local_periodograms: partition built for a different length");
  }
  std::vector<std::vector<Periodogram>> out;
  for (std::size_t j = 0; j < part.num_segments(); ++j) {
    out.push_back(segment_periodograms(data, part.begin(j), part.end(j), rule));
  }
  return out;
}

}  // namespace covspec
