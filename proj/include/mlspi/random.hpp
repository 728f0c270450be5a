#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace mlspi {

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace detail

/// Counter-based, splittable generator.
///
/// Output i of a stream is a pure function of (key, i), so a child stream
/// obtained with split() never depends on how many draws were made from the
/// parent or from sibling streams. All conversions to real numbers are done
/// here rather than through <random> distributions, whose output is
/// implementation-defined; results are therefore identical across standard
/// libraries.
///
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed) noexcept : key_(detail::mix64(seed ^ detail::kGolden)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Independent child stream identified by `stream`.
  CounterRng split(std::uint64_t stream) const noexcept {
    CounterRng child(0);
    child.key_ = detail::mix64(key_ ^ detail::mix64(stream + 0xD1B54A32D192ED03ULL));
    return child;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate (> 0).
  double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Uniform integer in [0, n).
  int uniform_int(int n) noexcept {
    const auto wide = static_cast<unsigned __int128>((*this)()) * static_cast<unsigned>(n);
    return static_cast<int>(wide >> 64);
  }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mlspi
