#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace llb {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
/// the output is a pure function of (counter, key), which is what lets every
/// trajectory, radius and intensity address the same Wiener path without
/// sharing generator state.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Standard normal variates addressed by (step, tag, index) within a stream
/// keyed by (seed, stream id). Box-Muller on 53-bit uniforms in (0, 1).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t k = splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  double normal(std::uint64_t step, std::uint32_t tag, std::uint32_t index) const {
    const auto pair = pair_at(step, tag, index / 2);
    return index % 2 == 0 ? pair[0] : pair[1];
  }

  std::array<double, 2> pair_at(std::uint64_t step, std::uint32_t tag, std::uint32_t pair) const {
    const auto r = Philox4x32::generate(
        {pair, tag, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)}, key_);
    const double u1 = to_unit(r[0], r[1]);
    const double u2 = to_unit(r[2], r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (std::uint64_t{hi} << 21) ^ (lo >> 11);
    return (static_cast<double>(bits & ((1ull << 53) - 1)) + 0.5) * 0x1.0p-53;
  }

  Philox4x32::Key key_{};
};

}  // namespace llb
