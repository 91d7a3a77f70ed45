#include "waterjudge/wm_core.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <string>

#include "waterjudge/errors.hpp"
#include "waterjudge/kernels.hpp"

namespace waterjudge {

namespace {

constexpr double kTwo53 = 9007199254740992.0;  // 2^53

std::uint64_t threshold_for(double g) {
  if (g >= 1.0) return std::uint64_t{1} << 53;
  return static_cast<std::uint64_t>(std::ceil(g * kTwo53));
}

std::uint32_t exact_size_for(double g, std::uint32_t vocab) {
  // g*V carries float noise (0.3*10 = 3.0000000000000004); snap before ceil.
  const double raw = std::ceil(g * static_cast<double>(vocab) - 1e-9);
  if (raw <= 0.0) return 0;
  if (raw >= vocab) return vocab;
  return static_cast<std::uint32_t>(raw);
}

}  // namespace

std::string_view to_string(PartitionMode mode) noexcept {
  return mode == PartitionMode::exact_partition ? "exact_partition" : "hash_threshold";
}

PartitionMode parse_partition_mode(std::string_view name) {
  if (name == "hash_threshold") return PartitionMode::hash_threshold;
  if (name == "exact_partition") return PartitionMode::exact_partition;
  throw DomainError("unknown partition mode: " + std::string(name));
}

BiasDelta::BiasDelta(double delta) : delta_(delta) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw DomainError("bias delta must be finite and >= 0");
}

GreenListRule::GreenListRule(std::uint64_t seed, double g, std::uint32_t vocab_size, PartitionMode mode)
    : seed_(seed), g_(g), vocab_size_(vocab_size), mode_(mode) {
  if (!(g >= 0.0 && g <= 1.0)) throw DomainError("green fraction g must lie in [0, 1]");
  if (vocab_size < 2) throw DomainError("vocab_size must be >= 2");
  threshold_ = threshold_for(g);
  exact_size_ = exact_size_for(g, vocab_size);
}

void GreenListRule::check_token(TokenId id, const char* what) const {
  if (id >= vocab_size_) {
    throw DomainError(std::string(what) + " token id " + std::to_string(id) + " out of range for vocab_size " +
                      std::to_string(vocab_size_));
  }
}

std::vector<TokenId> GreenListRule::permutation(TokenId prev) const {
  std::vector<TokenId> perm(vocab_size_);
  std::iota(perm.begin(), perm.end(), TokenId{0});
  std::uint64_t state = kernels::mix64(kernels::row_key(seed_, prev));
  for (std::uint32_t i = vocab_size_ - 1; i > 0; --i) {
    state += 0x9E3779B97F4A7C15ULL;
    const std::uint64_t r = kernels::mix64(state);
    const auto j = static_cast<std::uint32_t>(r % (static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

bool GreenListRule::is_green(TokenId prev, TokenId cand) const {
  check_token(prev, "prev");
  check_token(cand, "candidate");
  if (mode_ == PartitionMode::hash_threshold) {
    return (kernels::pair_hash(seed_, prev, cand) >> 11) < threshold_;
  }
  const auto perm = permutation(prev);
  for (std::uint32_t pos = 0; pos < exact_size_; ++pos) {
    if (perm[pos] == cand) return true;
  }
  return false;
}

std::vector<std::uint8_t> GreenListRule::green_mask(TokenId prev) const {
  check_token(prev, "prev");
  std::vector<std::uint8_t> mask(vocab_size_, 0);
  if (mode_ == PartitionMode::hash_threshold) {
    kernels::green_mask_row(kernels::row_key(seed_, prev), threshold_, mask);
  } else {
    const auto perm = permutation(prev);
    for (std::uint32_t pos = 0; pos < exact_size_; ++pos) mask[perm[pos]] = 1;
  }
  return mask;
}

std::vector<TokenId> GreenListRule::green_list(TokenId prev) const {
  if (vocab_size_ > kMaxGreenListVocab) {
    throw CapacityError("green_list enumeration is limited to vocab_size <= 65536");
  }
  const auto mask = green_mask(prev);
  std::vector<TokenId> out;
  for (std::uint32_t c = 0; c < vocab_size_; ++c) {
    if (mask[c]) out.push_back(c);
  }
  return out;
}

double hash_unit(std::uint64_t seed, TokenId prev, TokenId cand) noexcept {
  return static_cast<double>(kernels::pair_hash(seed, prev, cand) >> 11) / kTwo53;
}

void to_json(nlohmann::json& j, const GreenListRule& rule) {
  j = nlohmann::json{{"seed", std::to_string(rule.seed())},
                     {"g", rule.g()},
                     {"vocab_size", rule.vocab_size()},
                     {"mode", std::string(to_string(rule.mode()))}};
}

std::uint64_t parse_u64_string(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end || s.empty()) throw DomainError("invalid u64 string: '" + s + "'");
  return v;
}

GreenListRule rule_from_json(const nlohmann::json& j) {
  try {
    const auto& seed = j.at("seed");
    const std::uint64_t s = seed.is_string() ? parse_u64_string(seed.get<std::string>()) : seed.get<std::uint64_t>();
    const auto mode = j.contains("mode") ? parse_partition_mode(j.at("mode").get<std::string>())
                                         : PartitionMode::hash_threshold;
    return GreenListRule(s, j.at("g").get<double>(), j.at("vocab_size").get<std::uint32_t>(), mode);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed green-list rule: ") + e.what());
  }
}

std::vector<double> apply_bias(std::span<const double> logits, const GreenListRule& rule, TokenId prev,
                               BiasDelta delta) {
  if (logits.size() != rule.vocab_size()) {
    throw DomainError("apply_bias: logits length " + std::to_string(logits.size()) + " != vocab_size " +
                      std::to_string(rule.vocab_size()));
  }
  std::vector<double> out(logits.size());
  const auto mask = rule.green_mask(prev);
  kernels::add_masked(logits, mask, out, delta.value());
  return out;
}

GreenCount count_green(std::span<const TokenId> tokens, const GreenListRule& rule, TokenId prefix_last) {
  GreenCount gc;
  gc.total = tokens.size();
  if (tokens.empty()) return gc;
  for (TokenId t : tokens) {
    if (t >= rule.vocab_size()) throw DomainError("token id " + std::to_string(t) + " out of range");
  }
  if (prefix_last >= rule.vocab_size()) throw DomainError("prefix token out of range");

  if (rule.mode() == PartitionMode::hash_threshold) {
    std::vector<TokenId> prev(tokens.size());
    prev[0] = prefix_last;
    for (std::size_t i = 1; i < tokens.size(); ++i) prev[i] = tokens[i - 1];
    gc.green = kernels::count_green_pairs(rule.seed(), prev, tokens, rule.hash_threshold());
  } else {
    TokenId p = prefix_last;
    for (TokenId t : tokens) {
      if (rule.is_green(p, t)) ++gc.green;
      p = t;
    }
  }
  return gc;
}

double watermark_score(std::span<const TokenId> tokens, const GreenListRule& rule, TokenId prefix_last) {
  if (tokens.empty()) throw DomainError("watermark_score: empty token sequence");
  const auto gc = count_green(tokens, rule, prefix_last);
  return static_cast<double>(gc.green) / static_cast<double>(gc.total);
}

double grouped_score(std::span<const TokenGroup> groups, const GreenListRule& rule) {
  if (groups.empty()) throw DomainError("grouped_score: no groups");
  std::size_t green = 0;
  std::size_t total = 0;
  for (const auto& grp : groups) {
    if (grp.tokens.empty()) throw DomainError("grouped_score: empty sequence in group");
    const auto gc = count_green(grp.tokens, rule, grp.prefix_last);
    green += gc.green;
    total += gc.total;
  }
  return static_cast<double>(green) / static_cast<double>(total);
}

}  // namespace waterjudge
