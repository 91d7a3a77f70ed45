#pragma once
// Add-alpha smoothed n-gram language model over a small vocabulary.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "waterjudge/wm_core.hpp"

namespace waterjudge {

using Corpus = std::vector<TokenSeq>;

struct SamplerConfig {
  double temperature = 1.0;
  std::uint64_t rng_seed = 0;
  std::uint32_t max_tokens = 60;
  TokenId eos_token = 0;

  void validate() const;
};

struct Watermark {
  GreenListRule rule;
  BiasDelta delta;
};

class NGramLM {
 public:
  static constexpr int kMaxOrder = 5;
  static constexpr int kFormatVersion = 1;

  struct Row {
    std::vector<std::uint32_t> counts;
    std::uint64_t total = 0;
  };

  NGramLM(int order, std::uint32_t vocab_size, double alpha, TokenId bos);

  int order() const noexcept { return order_; }
  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  double alpha() const noexcept { return alpha_; }
  TokenId bos() const noexcept { return bos_; }
  std::size_t context_count() const noexcept { return rows_.size(); }

  // Adds one sequence's n-gram counts; the sequence is left-padded with BOS.
  void observe(std::span<const TokenId> seq);

  // Smoothed conditional P(next | last order-1 tokens of context).
  double probability(std::span<const TokenId> context, TokenId next) const;
  std::vector<double> log_probs(std::span<const TokenId> context) const;

  // Count of `next` after the context key (raw, unsmoothed).
  std::uint32_t count(std::span<const TokenId> context, TokenId next) const;

  nlohmann::json to_json() const;
  static NGramLM from_json(const nlohmann::json& j);

 private:
  std::uint64_t key_of(std::span<const TokenId> context) const;
  const Row* find_row(std::span<const TokenId> context) const;
  void check_token(TokenId t) const;

  int order_;
  std::uint32_t vocab_size_;
  double alpha_;
  TokenId bos_;
  std::map<std::uint64_t, Row> rows_;
};

// Train an order-n model; bos defaults to vocab_size - 1.
NGramLM train(const Corpus& corpus, int order, double alpha, std::uint32_t vocab_size,
              std::optional<TokenId> bos = std::nullopt);

// Log of the smoothed next-token distribution; exp-sums to 1.
std::vector<double> logits(const NGramLM& lm, std::span<const TokenId> context);

// Next-token sampling distribution (after optional bias and temperature).
std::vector<double> next_token_distribution(const NGramLM& lm, std::span<const TokenId> context,
                                            const SamplerConfig& cfg, const Watermark* wm);

// Temperature sampling, optionally through the green-list bias. Stops after eos or max_tokens;
// eos is kept in the output.
TokenSeq generate(const NGramLM& lm, std::span<const TokenId> prompt, const SamplerConfig& cfg,
                  const std::optional<Watermark>& wm = std::nullopt);

// Sum of log P(tokens[i] | prompt + tokens[<i]).
double log_likelihood(const NGramLM& lm, std::span<const TokenId> tokens, std::span<const TokenId> prompt);

// Corpus file: one whitespace-separated token-id sequence per line.
Corpus read_corpus(std::istream& in);
Corpus read_corpus_file(const std::string& path);
void write_corpus(std::ostream& out, const Corpus& corpus);

}  // namespace waterjudge
