#pragma once

// Counter-based random streams.
//
// Every random number used by the simulator is addressed by a key (derived
// from the master seed) and a 128-bit counter. Any element of any stream can
// be computed independently of every other one, so trials, layers and weight
// rows can be generated in any order and on any number of threads without
// changing a single bit of the output.
//
// The underlying bijection is Philox4x32-10 (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3", SC'11).

#include <array>
#include <cstdint>
#include <span>

namespace lenmap {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void philox_round(PhiloxCounter& ctr, const PhiloxKey& key) {
  const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * ctr[0];
  const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

/// Philox4x32 with 10 rounds.
constexpr PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += detail::kPhiloxW0;
      key[1] += detail::kPhiloxW1;
    }
    detail::philox_round(ctr, key);
  }
  return ctr;
}

constexpr PhiloxKey key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Maps 64 random bits to (k + 1/2) / 2^52 with k the top 52 bits. Every step
/// is exact, and the result lies in [2^-53, 1 - 2^-53], so the normal
/// quantile is always finite.
constexpr double uniform_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Address of one stream: the three high counter words. The low counter word
/// enumerates 128-bit blocks inside the stream, so a stream holds up to 2^33
/// doubles.
struct StreamId {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint32_t c = 0;
};

/// Fills `out` with the uniforms of the stream starting at element 0.
/// Element k of the stream is always the same double regardless of the
/// length of `out`.
void fill_uniforms(const PhiloxKey& key, StreamId stream, std::span<double> out);

/// Fills `out` with standard normal variates obtained by the inverse-CDF
/// transform of `fill_uniforms`.
void fill_normals(const PhiloxKey& key, StreamId stream, std::span<double> out);

/// Sequential view of one stream, for code that draws numbers one at a time
/// (bootstrap resampling, input sign patterns).
class CounterStream {
 public:
  CounterStream(PhiloxKey key, StreamId stream) : key_(key), stream_(stream) {}

  double uniform() {
    if (cursor_ == 2) refill();
    return buffer_[cursor_++];
  }

  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) % bound;
  }

 private:
  void refill() {
    const auto out = philox4x32({block_, stream_.a, stream_.b, stream_.c}, key_);
    ++block_;
    buffer_[0] = uniform_open(std::uint64_t{out[0]} | (std::uint64_t{out[1]} << 32));
    buffer_[1] = uniform_open(std::uint64_t{out[2]} | (std::uint64_t{out[3]} << 32));
    cursor_ = 0;
  }

  PhiloxKey key_;
  StreamId stream_;
  std::uint32_t block_ = 0;
  std::array<double, 2> buffer_{};
  int cursor_ = 2;
};

}  // namespace lenmap
