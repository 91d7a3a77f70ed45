// AVX2 variants. This translation unit is compiled with -mavx2 and must only
// be reached through the dispatch table after a CPUID check.

#include "waterjudge/kernels.hpp"

#if defined(WATERJUDGE_HAVE_AVX2)

#include <immintrin.h>

#include <bit>
#include <cstring>

namespace waterjudge::kernels {
namespace {

// Low 64 bits of a * b per lane, b given as (lo, hi) 32-bit halves.
inline __m256i mullo64(__m256i a, __m256i b, __m256i b_hi) {
  const __m256i lo = _mm256_mul_epu32(a, b);
  const __m256i cross = _mm256_add_epi64(_mm256_mul_epu32(_mm256_srli_epi64(a, 32), b), _mm256_mul_epu32(a, b_hi));
  return _mm256_add_epi64(lo, _mm256_slli_epi64(cross, 32));
}

struct Mixer {
  __m256i m1 = _mm256_set1_epi64x(static_cast<long long>(0xBF58476D1CE4E5B9ULL));
  __m256i m1_hi = _mm256_srli_epi64(m1, 32);
  __m256i m2 = _mm256_set1_epi64x(static_cast<long long>(0x94D049BB133111EBULL));
  __m256i m2_hi = _mm256_srli_epi64(m2, 32);

  __m256i operator()(__m256i z) const {
    z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 30));
    z = mullo64(z, m1, m1_hi);
    z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 27));
    z = mullo64(z, m2, m2_hi);
    z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 31));
    return z;
  }
};

// Both operands are below 2^63 after the shift, so a signed compare is exact.
inline int green_bits(__m256i h, __m256i threshold) {
  const __m256i k = _mm256_srli_epi64(h, 11);
  return _mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpgt_epi64(threshold, k)));
}

void green_mask_row_avx2(std::uint64_t key, std::uint64_t threshold, std::uint8_t* out, std::size_t n) {
  const Mixer mix;
  const __m256i vkey = _mm256_set1_epi64x(static_cast<long long>(key));
  const __m256i vthr = _mm256_set1_epi64x(static_cast<long long>(threshold));
  const __m256i cmul = _mm256_set1_epi64x(static_cast<long long>(kCandMultiplier));
  const __m256i cmul_hi = _mm256_srli_epi64(cmul, 32);
  const __m256i step = _mm256_set1_epi64x(4);
  __m256i cand = _mm256_setr_epi64x(0, 1, 2, 3);

  std::size_t c = 0;
  for (; c + 4 <= n; c += 4) {
    const __m256i h = mix(_mm256_xor_si256(vkey, mullo64(cand, cmul, cmul_hi)));
    const int bits = green_bits(h, vthr);
    out[c + 0] = static_cast<std::uint8_t>(bits & 1);
    out[c + 1] = static_cast<std::uint8_t>((bits >> 1) & 1);
    out[c + 2] = static_cast<std::uint8_t>((bits >> 2) & 1);
    out[c + 3] = static_cast<std::uint8_t>((bits >> 3) & 1);
    cand = _mm256_add_epi64(cand, step);
  }
  for (; c < n; ++c) {
    const std::uint64_t h = mix64(key ^ (static_cast<std::uint64_t>(c) * kCandMultiplier));
    out[c] = (h >> 11) < threshold ? 1 : 0;
  }
}

std::size_t count_green_pairs_avx2(std::uint64_t seed, const std::uint32_t* prev, const std::uint32_t* cand,
                                   std::size_t n, std::uint64_t threshold) {
  const Mixer mix;
  const __m256i vseed = _mm256_set1_epi64x(static_cast<long long>(seed));
  const __m256i vthr = _mm256_set1_epi64x(static_cast<long long>(threshold));
  const __m256i pmul = _mm256_set1_epi64x(static_cast<long long>(kPrevMultiplier));
  const __m256i pmul_hi = _mm256_srli_epi64(pmul, 32);
  const __m256i cmul = _mm256_set1_epi64x(static_cast<long long>(kCandMultiplier));
  const __m256i cmul_hi = _mm256_srli_epi64(cmul, 32);

  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i p = _mm256_cvtepu32_epi64(_mm_loadu_si128(reinterpret_cast<const __m128i*>(prev + i)));
    const __m256i c = _mm256_cvtepu32_epi64(_mm_loadu_si128(reinterpret_cast<const __m128i*>(cand + i)));
    const __m256i key = _mm256_xor_si256(vseed, mullo64(p, pmul, pmul_hi));
    const __m256i h = mix(_mm256_xor_si256(key, mullo64(c, cmul, cmul_hi)));
    count += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(green_bits(h, vthr))));
  }
  for (; i < n; ++i) {
    if ((pair_hash(seed, prev[i], cand[i]) >> 11) < threshold) ++count;
  }
  return count;
}

void add_masked_avx2(const double* in, const std::uint8_t* mask, double* out, std::size_t n, double delta) {
  const __m256d vdelta = _mm256_set1_pd(delta);
  const __m256i zero = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    std::int32_t packed;
    std::memcpy(&packed, mask + i, sizeof(packed));
    const __m256i m64 = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(packed));
    const __m256d sel = _mm256_castsi256_pd(_mm256_cmpgt_epi64(m64, zero));
    const __m256d x = _mm256_loadu_pd(in + i);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(x, _mm256_add_pd(x, vdelta), sel));
  }
  for (; i < n; ++i) {
    out[i] = mask[i] ? in[i] + delta : in[i];
  }
}

double max_value_avx2(const double* v, std::size_t n) {
  if (n < 8) {
    double m = v[0];
    for (std::size_t i = 1; i < n; ++i) {
      if (v[i] > m) m = v[i];
    }
    return m;
  }
  __m256d acc = _mm256_loadu_pd(v);
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(v + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double m = lanes[0];
  for (int k = 1; k < 4; ++k) {
    if (lanes[k] > m) m = lanes[k];
  }
  for (; i < n; ++i) {
    if (v[i] > m) m = v[i];
  }
  return m;
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{
    green_mask_row_avx2,
    count_green_pairs_avx2,
    add_masked_avx2,
    max_value_avx2,
};
}  // namespace detail

}  // namespace waterjudge::kernels

#endif  // WATERJUDGE_HAVE_AVX2
