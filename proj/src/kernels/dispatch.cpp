#include <cstdlib>
#include <string>

#include "waterjudge/errors.hpp"
#include "waterjudge/kernels.hpp"

namespace waterjudge::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(WATERJUDGE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa select_isa() noexcept {
  const bool avx2 = cpu_has_avx2();
  if (const char* env = std::getenv("WATERJUDGE_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && avx2) return Isa::avx2;
  }
  return avx2 ? Isa::avx2 : Isa::scalar;
}

}  // namespace

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return cpu_has_avx2();
  }
  return false;
}

const KernelTable& table(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return detail::kScalarTable;
    case Isa::avx2:
#if defined(WATERJUDGE_HAVE_AVX2)
      if (cpu_has_avx2()) return detail::kAvx2Table;
#endif
      break;
  }
  throw DomainError("kernel variant not available on this CPU: " + std::string(isa_name(isa)));
}

Isa active_isa() noexcept {
  static const Isa isa = select_isa();
  return isa;
}

std::string_view isa_name(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

namespace {
const KernelTable& active() {
  static const KernelTable& t = table(active_isa());
  return t;
}
}  // namespace

void green_mask_row(std::uint64_t key, std::uint64_t threshold, std::span<std::uint8_t> out) {
  active().green_mask_row(key, threshold, out.data(), out.size());
}

std::size_t count_green_pairs(std::uint64_t seed, std::span<const std::uint32_t> prev,
                              std::span<const std::uint32_t> cand, std::uint64_t threshold) {
  if (prev.size() != cand.size()) throw DomainError("count_green_pairs: prev/cand length mismatch");
  return active().count_green_pairs(seed, prev.data(), cand.data(), prev.size(), threshold);
}

void add_masked(std::span<const double> in, std::span<const std::uint8_t> mask, std::span<double> out, double delta) {
  if (in.size() != mask.size() || in.size() != out.size()) throw DomainError("add_masked: length mismatch");
  active().add_masked(in.data(), mask.data(), out.data(), in.size(), delta);
}

double max_value(std::span<const double> v) {
  if (v.empty()) throw DomainError("max_value: empty input");
  return active().max_value(v.data(), v.size());
}

}  // namespace waterjudge::kernels
