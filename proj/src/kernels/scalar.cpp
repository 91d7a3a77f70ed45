#include "waterjudge/kernels.hpp"

namespace waterjudge::kernels {
namespace {

void green_mask_row_scalar(std::uint64_t key, std::uint64_t threshold, std::uint8_t* out, std::size_t n) {
  for (std::size_t c = 0; c < n; ++c) {
    const std::uint64_t h = mix64(key ^ (static_cast<std::uint64_t>(c) * kCandMultiplier));
    out[c] = (h >> 11) < threshold ? 1 : 0;
  }
}

std::size_t count_green_pairs_scalar(std::uint64_t seed, const std::uint32_t* prev, const std::uint32_t* cand,
                                     std::size_t n, std::uint64_t threshold) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if ((pair_hash(seed, prev[i], cand[i]) >> 11) < threshold) ++count;
  }
  return count;
}

void add_masked_scalar(const double* in, const std::uint8_t* mask, double* out, std::size_t n, double delta) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = mask[i] ? in[i] + delta : in[i];
  }
}

double max_value_scalar(const double* v, std::size_t n) {
  double m = v[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (v[i] > m) m = v[i];
  }
  return m;
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{
    green_mask_row_scalar,
    count_green_pairs_scalar,
    add_masked_scalar,
    max_value_scalar,
};
}  // namespace detail

}  // namespace waterjudge::kernels
