#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace covspec {

class TimeSeriesSet;
class TimePartition;

/// Which Fourier ordinates enter the likelihood.
///  - Standard: k / T for k = 1..floor(T/2) - 1. Zero and Nyquist are
///    excluded, and for odd T so is the top ordinate (T-1)/(2T).
///  - Complete: every interior ordinate k = 1..floor((T-1)/2), the
///    real-valued Nyquist ordinate 1/2 when T is even, and the real-valued
///    zero ordinate. A segment then accounts for exactly T data dimensions,
///    so likelihoods of different segmentations cover the same data.
enum class FrequencyRule { Standard, Complete };

/// Fourier frequencies k / T for k = 1..n. The zero and Nyquist ordinates are
/// kept apart from `frequencies` because their likelihood terms have half the
/// weight.
struct FourierGrid {
  std::size_t segment_length = 0;
  std::size_t n = 0;
  std::vector<double> frequencies;
  bool nyquist = false;
  bool zero = false;
  FrequencyRule rule = FrequencyRule::Standard;

  bool operator==(const FourierGrid&) const = default;
};

struct Periodogram {
  FourierGrid grid;
  std::vector<double> values;
  double nyquist_value = 0.0;  // Y(1/2); meaningful only if grid.nyquist
  double zero_value = 0.0;     // Y(0); meaningful only if grid.zero

  bool operator==(const Periodogram&) const = default;
};

/// Throws std::invalid_argument when segment_length < 4.
/// Standard: n = floor(T/2) - 1. Complete: n = floor((T-1)/2), nyquist = T
/// even, zero = true.
FourierGrid fourier_grid(std::size_t segment_length,
                         FrequencyRule rule = FrequencyRule::Standard);

/// |sum_t x_t exp(-2 pi i nu_k t)|^2 / T at every grid frequency. The input
/// is expected to be demeaned already. Arbitrary lengths are supported; the
/// transform runs through FFTW with plans cached per length.
Periodogram periodogram(std::span<const double> segment,
                        FrequencyRule rule = FrequencyRule::Standard);

/// Squared DFT moduli over the full range k = 0..floor(T/2), divided by T.
/// Includes the zero and Nyquist ordinates that `periodogram` drops.
std::vector<double> full_periodogram(std::span<const double> segment);

/// Demeaned periodograms of every subject over observations [begin, end)
/// (0-based), all on one grid. Under the Complete rule the zero ordinate is
/// taken before the segment is demeaned, from the series centred on its
/// full-length mean: Y(0) = T_j (segment mean - series mean)^2.
std::vector<Periodogram> segment_periodograms(const TimeSeriesSet& data, std::size_t begin,
                                              std::size_t end,
                                              FrequencyRule rule = FrequencyRule::Standard);

/// Entry [j][l] is subject l's periodogram over time segment j of `part`.
std::vector<std::vector<Periodogram>> local_periodograms(
    const TimeSeriesSet& data, const TimePartition& part,
    FrequencyRule rule = FrequencyRule::Standard);

}  // namespace covspec
