#pragma once

#include <array>
#include <cstdint>

namespace fnn {

/// xoshiro256** seeded through splitmix64.
///
/// Every random draw in the library goes through this generator so runs are
/// reproducible bit-for-bit from a single 64-bit seed, independent of the
/// standard library in use. Reference outputs for seed 42 are listed in the
/// README.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform integer in [0, bound), bound > 0; unbiased by rejection.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();
  /// Exponential(1) via inversion: -log(1 - U).
  double exponential();

  std::array<std::uint64_t, 4> state() const noexcept { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) noexcept { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace fnn
