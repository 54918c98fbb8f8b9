#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace umsa {

/// A seeded random stream. Every stochastic routine in the library draws
/// from one of these, never from global state, so a replicate is fully
/// determined by its (seed, stream) pair.
///
/// Streams for different `stream` indices are seeded through std::seed_seq
/// over both 64-bit words, which decorrelates them from a single master seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  /// Standard normal draw. Counted in gaussian_draws().
  double normal() {
    ++gaussian_draws_;
    return normal_(engine_);
  }

  /// Uniform draw on [0, 1).
  double uniform() { return uniform_(engine_); }

  /// Fills `out` with independent N(0, variance) draws.
  void fill_normal(std::span<double> out, double variance);

  std::uint64_t gaussian_draws() const { return gaussian_draws_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
  boost::random::uniform_01<double> uniform_;
  std::uint64_t gaussian_draws_ = 0;
};

/// SplitMix64 finaliser; used to derive child seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace umsa
