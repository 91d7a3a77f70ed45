#pragma once
// Green/red vocabulary partitioning, logit biasing and watermark scoring.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace waterjudge {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

enum class PartitionMode { hash_threshold, exact_partition };

std::string_view to_string(PartitionMode mode) noexcept;
PartitionMode parse_partition_mode(std::string_view name);

inline constexpr std::uint32_t kMaxGreenListVocab = 1u << 16;

// Additive log-domain green-list bonus.
class BiasDelta {
 public:
  explicit BiasDelta(double delta);
  double value() const noexcept { return delta_; }

 private:
  double delta_;
};

// Per-context vocabulary partition keyed by (global seed, previous token).
//
// hash_threshold: cand is green iff u(prev, cand) < g where u is the top 53
// bits of mix64(seed ^ prev*C1 ^ cand*C2). Green lists are nested in g.
// exact_partition: green iff cand sits in the first ceil(g*V) slots of a
// Fisher-Yates shuffle seeded per prev. Exact cardinality, O(V) per query.
class GreenListRule {
 public:
  GreenListRule(std::uint64_t seed, double g, std::uint32_t vocab_size,
                PartitionMode mode = PartitionMode::hash_threshold);

  std::uint64_t seed() const noexcept { return seed_; }
  double g() const noexcept { return g_; }
  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  PartitionMode mode() const noexcept { return mode_; }

  // Integer threshold on the 53-bit hash: green iff (hash >> 11) < threshold.
  std::uint64_t hash_threshold() const noexcept { return threshold_; }
  // Green-list size in exact_partition mode.
  std::uint32_t exact_size() const noexcept { return exact_size_; }

  bool is_green(TokenId prev, TokenId cand) const;
  // One byte per vocabulary entry, 1 = green.
  std::vector<std::uint8_t> green_mask(TokenId prev) const;
  // Sorted green token ids.
  std::vector<TokenId> green_list(TokenId prev) const;

  friend bool operator==(const GreenListRule&, const GreenListRule&) = default;

 private:
  void check_token(TokenId id, const char* what) const;
  std::vector<TokenId> permutation(TokenId prev) const;

  std::uint64_t seed_;
  double g_;
  std::uint32_t vocab_size_;
  PartitionMode mode_;
  std::uint64_t threshold_;
  std::uint32_t exact_size_;
};

// Hash value u in [0, 1) for a (prev, cand) pair, on the 2^-53 grid.
double hash_unit(std::uint64_t seed, TokenId prev, TokenId cand) noexcept;

// Decimal u64 as used for seeds in JSON ("18446744073709551615").
std::uint64_t parse_u64_string(const std::string& s);

void to_json(nlohmann::json& j, const GreenListRule& rule);
GreenListRule rule_from_json(const nlohmann::json& j);

// Logit bias: green entries get +delta, others unchanged.
std::vector<double> apply_bias(std::span<const double> logits, const GreenListRule& rule, TokenId prev,
                               BiasDelta delta);

// Fraction of tokens that are green given their predecessor; tokens[0] is conditioned on prefix_last.
double watermark_score(std::span<const TokenId> tokens, const GreenListRule& rule, TokenId prefix_last);

// Green transitions and token count of a single sequence.
struct GreenCount {
  std::size_t green = 0;
  std::size_t total = 0;
};
GreenCount count_green(std::span<const TokenId> tokens, const GreenListRule& rule, TokenId prefix_last);

struct TokenGroup {
  std::span<const TokenId> tokens;
  TokenId prefix_last;
};

// Pooled green count over pooled length across all groups.
double grouped_score(std::span<const TokenGroup> groups, const GreenListRule& rule);

}  // namespace waterjudge
