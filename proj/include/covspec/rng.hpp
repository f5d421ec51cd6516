#pragma once

#include <cstdint>
#include <random>

namespace covspec {

/// Seeded random stream used by the sampler and the simulators.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The transforms to uniform, normal and gamma variates are written
/// out here rather than taken from <random> distributions, whose algorithms
/// are implementation-defined; this keeps chains bit-identical across
/// standard libraries.
///
///  - uniform(): top 53 bits of one engine word, scaled to [0, 1).
///  - normal(): Marsaglia polar method; the second variate of each pair is
///    cached.
///  - substream(): derives an independent stream from (seed, a, b) by
///    SplitMix64 hashing, so per-iteration / per-move / per-subject streams
///    never depend on how many draws another stream consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  /// Uniform integer on [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace covspec
