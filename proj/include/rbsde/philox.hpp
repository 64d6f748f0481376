#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rbsde {

// Philox4x32-10 (Salmon et al., SC'11). A pure function of (key, counter),
// so every path can draw its own stream without shared state.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Block operator()(Block ctr) const {
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, k);
      k[0] += kW0;
      k[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  std::array<std::uint32_t, 2> key_;
};

// Draws for one path: counter = (path lo, path hi, step, block).
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path, std::uint32_t step)
      : rng_(seed), path_(path), step_(step) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    if (pos_ == 4) refill();
    const std::uint64_t a = buf_[pos_++] >> 5;
    const std::uint64_t b = buf_[pos_++] >> 6;
    return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) *
           (1.0 / 9007199254740992.0);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

 private:
  void refill() {
    buf_ = rng_({static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32), step_,
                 block_++});
    pos_ = 0;
  }

  Philox4x32 rng_;
  std::uint64_t path_;
  std::uint32_t step_;
  std::uint32_t block_ = 0;
  Philox4x32::Block buf_{};
  int pos_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rbsde
