#pragma once

#include <cstdint>
#include <random>

namespace gnsadv {

/// Seedable pseudo-random stream used everywhere randomness is needed.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Seeds are expanded through SplitMix64 so that nearby seeds and
/// stream ids give unrelated sequences. Uniform, bounded-integer and normal
/// draws are computed here rather than through the <random> distributions,
/// whose algorithms differ between standard libraries; that keeps seeded
/// runs reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent child stream, e.g. one per worker or per purpose.
  Rng split(std::uint64_t stream_id) const;

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound) without modulo bias. bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal draw (Marsaglia polar method).
  double normal();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace gnsadv
