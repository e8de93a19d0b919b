#pragma once

// Counter-based random streams.
//
// A stream is a 64-bit key plus a counter; the n-th output is a SplitMix64
// finalisation of key + n * golden. Streams for (seed, run, client, ...) are
// derived by hashing the coordinates into a key, so every client owns an
// independent stream whose contents do not depend on evaluation order.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace aaa {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Hash an ordered list of coordinates into a stream key.
constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t key = detail::mix64(seed + detail::kGolden);
  for (std::uint64_t c : coords) key = detail::mix64(key ^ detail::mix64(c + detail::kGolden));
  return key;
}

/// Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Stream(std::uint64_t key = 0) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Child stream keyed on this stream's key and the given coordinates.
  constexpr Stream fork(std::initializer_list<std::uint64_t> coords) const noexcept {
    return Stream(derive_key(key_, coords));
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Uniform double in [0, 1) with 53 random bits.
template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1); safe to pass to log().
template <class Rng>
double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

template <class Rng>
bool bernoulli(Rng& rng, double p) {
  return uniform01(rng) < p;
}

/// Uniform integer in [0, n) by Lemire's multiply-shift with rejection.
template <class Rng>
std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  std::uint64_t x = rng();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = rng();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

/// Number of failures before the first success, success probability p in (0, 1].
template <class Rng>
std::uint64_t geometric_failures(Rng& rng, double p) {
  if (p >= 1.0) return 0;
  const double g = std::floor(std::log(uniform_open01(rng)) / std::log1p(-p));
  return static_cast<std::uint64_t>(g);
}

template <class Rng>
double standard_normal(Rng& rng) {
  // Box-Muller, cosine branch only: one draw per call keeps streams stateless.
  const double u1 = uniform_open01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace aaa
