#pragma once

#include <cstdint>

#include "waterjudge/kernels.hpp"

namespace waterjudge {

// splitmix64 stream. Fully specified, so sampled outputs are identical across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return kernels::mix64(state_);
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t below(std::uint64_t n) noexcept { return next() % n; }

 private:
  std::uint64_t state_;
};

// Independent seed for stream `index` under `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return kernels::mix64(base ^ kernels::mix64(index + 0x632BE59BD9B4E019ULL));
}

}  // namespace waterjudge
