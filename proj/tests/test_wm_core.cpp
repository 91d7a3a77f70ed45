#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "waterjudge/errors.hpp"
#include "waterjudge/kernels.hpp"
#include "waterjudge/rng.hpp"
#include "waterjudge/wm_core.hpp"

using namespace waterjudge;

namespace {

// Fisher-Yates from the documented stream, written out longhand.
std::vector<TokenId> reference_green(std::uint64_t seed, TokenId prev, double g, std::uint32_t vocab) {
  std::vector<TokenId> perm(vocab);
  std::iota(perm.begin(), perm.end(), 0u);
  std::uint64_t state = kernels::mix64(seed ^ (std::uint64_t{prev} * 0x9E3779B97F4A7C15ULL));
  for (std::uint32_t i = vocab - 1; i >= 1; --i) {
    state += 0x9E3779B97F4A7C15ULL;
    const std::uint64_t r = kernels::mix64(state);
    std::swap(perm[i], perm[r % (i + 1)]);
  }
  const auto k = static_cast<std::size_t>(std::ceil(g * vocab - 1e-9));
  std::vector<TokenId> green(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(green.begin(), green.end());
  return green;
}

}  // namespace

TEST_CASE("constructor and delta validation") {
  CHECK_THROWS_AS(GreenListRule(1, -0.1, 10), DomainError);
  CHECK_THROWS_AS(GreenListRule(1, 1.1, 10), DomainError);
  CHECK_THROWS_AS(GreenListRule(1, std::nan(""), 10), DomainError);
  CHECK_THROWS_AS(GreenListRule(1, 0.5, 1), DomainError);
  CHECK_THROWS_AS(BiasDelta(-1.0), DomainError);
  CHECK_THROWS_AS(BiasDelta(std::numeric_limits<double>::infinity()), DomainError);
  CHECK(BiasDelta(0.0).value() == 0.0);
  const GreenListRule r(1, 0.5, 10);
  CHECK_THROWS_AS(r.is_green(10, 0), DomainError);
  CHECK_THROWS_AS(r.is_green(0, 10), DomainError);
}

TEST_CASE("g extremes") {
  for (auto mode : {PartitionMode::hash_threshold, PartitionMode::exact_partition}) {
    const GreenListRule none(5, 0.0, 64, mode);
    const GreenListRule all(5, 1.0, 64, mode);
    for (TokenId p = 0; p < 64; ++p) {
      CHECK(none.green_list(p).empty());
      CHECK(all.green_list(p).size() == 64);
    }
  }
}

TEST_CASE("hash_threshold membership equals u < g") {
  const GreenListRule rule(123456789, 0.3, 500);
  for (TokenId p = 0; p < 20; ++p) {
    for (TokenId c = 0; c < 500; ++c) CHECK(rule.is_green(p, c) == (hash_unit(123456789, p, c) < 0.3));
  }
}

TEST_CASE("green lists nest in g and partition the vocabulary") {
  const std::uint32_t v = 200;
  std::vector<std::uint8_t> prev_mask(v, 0);
  for (double g : {0.05, 0.2, 0.5, 0.8, 0.95}) {
    const GreenListRule rule(77, g, v);
    const auto mask = rule.green_mask(9);
    const auto list = rule.green_list(9);
    CHECK(static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)) == list.size());
    for (TokenId c = 0; c < v; ++c) {
      if (prev_mask[c]) CHECK(mask[c] == 1);
      CHECK(rule.is_green(9, c) == (mask[c] == 1));
    }
    prev_mask = mask;
  }
}

TEST_CASE("exact_partition matches a longhand Fisher-Yates and has exact size") {
  for (std::uint32_t v : {2u, 10u, 33u, 256u}) {
    for (double g : {0.1, 0.3, 0.5, 0.77}) {
      const GreenListRule rule(2024, g, v, PartitionMode::exact_partition);
      const auto expect_size = static_cast<std::uint32_t>(std::ceil(g * v - 1e-9));
      CHECK(rule.exact_size() == expect_size);
      for (TokenId p : {TokenId{0}, v - 1, v / 2}) {
        const auto list = rule.green_list(p);
        CHECK(list == reference_green(2024, p, g, v));
        CHECK(list.size() == expect_size);
      }
    }
  }
  // 0.3 * 10 is 3.0000000000000004 in binary; the green list still has 3 entries.
  CHECK(GreenListRule(1, 0.3, 10, PartitionMode::exact_partition).exact_size() == 3);
}

TEST_CASE("green_list enumeration is capped") {
  const GreenListRule big(1, 0.5, 70000);
  CHECK_THROWS_AS(big.green_list(0), CapacityError);
  CHECK_NOTHROW(big.is_green(69999, 69998));
}

TEST_CASE("apply_bias") {
  const GreenListRule rule(31, 0.4, 50);
  std::vector<double> logits(50);
  SplitMix64 rng(3);
  for (auto& l : logits) l = rng.uniform() * 10 - 5;

  SUBCASE("delta 0 is an exact identity") {
    const auto out = apply_bias(logits, rule, 7, BiasDelta(0.0));
    CHECK(out == logits);
  }
  SUBCASE("green entries gain delta, red entries unchanged") {
    const auto out = apply_bias(logits, rule, 7, BiasDelta(2.5));
    for (TokenId c = 0; c < 50; ++c) CHECK(out[c] == (rule.is_green(7, c) ? logits[c] + 2.5 : logits[c]));
  }
  SUBCASE("length mismatch") {
    logits.pop_back();
    CHECK_THROWS_AS(apply_bias(logits, rule, 7, BiasDelta(1.0)), DomainError);
  }
}

TEST_CASE("watermark score counts green transitions") {
  const GreenListRule rule(8, 0.5, 40);
  const TokenSeq toks{3, 17, 22, 5, 39, 0};
  std::size_t green = 0;
  TokenId prev = 12;
  for (TokenId t : toks) {
    green += rule.is_green(prev, t) ? 1 : 0;
    prev = t;
  }
  CHECK(watermark_score(toks, rule, 12) == static_cast<double>(green) / static_cast<double>(toks.size()));
  const auto c = count_green(toks, rule, 12);
  CHECK(c.green == green);
  CHECK(c.total == toks.size());
  CHECK_THROWS_AS(watermark_score(TokenSeq{}, rule, 12), DomainError);
  CHECK_THROWS_AS(watermark_score(toks, rule, 40), DomainError);
}

TEST_CASE("grouped score pools counts") {
  const GreenListRule rule(8, 0.5, 40);
  const TokenSeq a{1, 2, 3};
  const TokenSeq b{4, 5, 6, 7, 8};
  const TokenGroup single[] = {{a, 9}};
  CHECK(grouped_score(single, rule) == watermark_score(a, rule, 9));
  const TokenGroup both[] = {{a, 9}, {b, 10}};
  const auto ca = count_green(a, rule, 9);
  const auto cb = count_green(b, rule, 10);
  CHECK(grouped_score(both, rule) == static_cast<double>(ca.green + cb.green) / (ca.total + cb.total));
}

TEST_CASE("rule JSON round trip keeps full u64 seeds") {
  const GreenListRule rule(std::numeric_limits<std::uint64_t>::max(), 0.25, 128, PartitionMode::exact_partition);
  nlohmann::json j = rule;
  CHECK(j["seed"] == "18446744073709551615");
  CHECK(rule_from_json(j) == rule);
  CHECK_THROWS_AS(rule_from_json(nlohmann::json{{"seed", "x"}}), DomainError);
  CHECK(parse_partition_mode("exact_partition") == PartitionMode::exact_partition);
  CHECK_THROWS_AS(parse_partition_mode("nope"), DomainError);
}

TEST_CASE("hash_unit is roughly uniform") {
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += hash_unit(99, static_cast<TokenId>(i % 300), static_cast<TokenId>(i / 300));
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}
