#pragma once
// Data-parallel inner loops of the watermark pipeline.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. All variants are bit-exact with the scalar reference: the hashing
// kernels are pure integer arithmetic, and the floating-point kernels only use
// element-wise operations and max, which do not depend on evaluation order.
// The active variant is chosen once at runtime from CPUID, and can be pinned
// with WATERJUDGE_ISA=scalar|avx2.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace waterjudge::kernels {

inline constexpr std::uint64_t kPrevMultiplier = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kCandMultiplier = 0xBF58476D1CE4E5B9ULL;

// splitmix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t row_key(std::uint64_t seed, std::uint32_t prev) noexcept {
  return seed ^ (static_cast<std::uint64_t>(prev) * kPrevMultiplier);
}

constexpr std::uint64_t pair_hash(std::uint64_t seed, std::uint32_t prev, std::uint32_t cand) noexcept {
  return mix64(row_key(seed, prev) ^ (static_cast<std::uint64_t>(cand) * kCandMultiplier));
}

enum class Isa { scalar, avx2 };

struct KernelTable {
  // out[c] = (pair_hash(.., c) >> 11) < threshold for c in [0, n); key = row_key(seed, prev).
  void (*green_mask_row)(std::uint64_t key, std::uint64_t threshold, std::uint8_t* out, std::size_t n);
  // Number of i with (pair_hash(seed, prev[i], cand[i]) >> 11) < threshold.
  std::size_t (*count_green_pairs)(std::uint64_t seed, const std::uint32_t* prev, const std::uint32_t* cand,
                                   std::size_t n, std::uint64_t threshold);
  // out[i] = mask[i] ? in[i] + delta : in[i]
  void (*add_masked)(const double* in, const std::uint8_t* mask, double* out, std::size_t n, double delta);
  // Largest element; n must be >= 1.
  double (*max_value)(const double* v, std::size_t n);
};

bool isa_available(Isa isa) noexcept;
const KernelTable& table(Isa isa);
Isa active_isa() noexcept;
std::string_view isa_name(Isa isa) noexcept;

// Convenience wrappers over the active table.
void green_mask_row(std::uint64_t key, std::uint64_t threshold, std::span<std::uint8_t> out);
std::size_t count_green_pairs(std::uint64_t seed, std::span<const std::uint32_t> prev,
                              std::span<const std::uint32_t> cand, std::uint64_t threshold);
void add_masked(std::span<const double> in, std::span<const std::uint8_t> mask, std::span<double> out, double delta);
double max_value(std::span<const double> v);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(WATERJUDGE_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
}  // namespace detail

}  // namespace waterjudge::kernels
