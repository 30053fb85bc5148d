#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace adaptis {

/// One step of the splitmix64 sequence; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Hash a master seed together with a list of stream coordinates
/// (iteration, start state, replication index, ...) into a 64-bit seed.
/// Distinct coordinate tuples give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept;

/// xoshiro256** generator. Small state, cheap to construct per replication,
/// and bit-identical on every platform.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t s_[4];
};

/// Generator for the stream addressed by (seed, coords...).
inline Xoshiro256 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept {
  return Xoshiro256(derive_seed(seed, coords));
}

}  // namespace adaptis
