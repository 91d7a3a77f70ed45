#pragma once
// Synthetic document source used to build desk-scale training corpora and prompts.
//
// Token layout: 0 = EOS, 1 = '.', 2..V-2 = words, V-1 = BOS (reserved, never emitted).
// Each word has a fixed, seed-derived set of likely successors with decaying
// weights, so an order-3 model sees every reachable context many times.

#include <cstdint>
#include <vector>

#include "waterjudge/toy_lm.hpp"

namespace waterjudge {

inline constexpr TokenId kEosToken = 0;
inline constexpr TokenId kPeriodToken = 1;

struct SyntheticSourceSpec {
  std::uint32_t vocab_size = 128;
  std::uint64_t seed = 7;
  std::vector<double> successor_weights{0.7, 0.2, 0.1};
  double period_prob = 0.08;  // P('.' | word)
  double end_prob = 0.15;     // P(EOS | '.')
  std::uint32_t max_doc_len = 400;
};

class SyntheticSource {
 public:
  explicit SyntheticSource(SyntheticSourceSpec spec);

  const SyntheticSourceSpec& spec() const noexcept { return spec_; }
  TokenId bos() const noexcept { return spec_.vocab_size - 1; }

  // One document, ending in EOS unless max_doc_len is hit first.
  TokenSeq sample_document(std::uint64_t seed) const;
  // Documents until at least n_tokens tokens have been emitted.
  Corpus corpus(std::size_t n_tokens, std::uint64_t seed) const;
  // n prompts of exactly `length` tokens, each cut from a fresh document that contains no EOS in that span.
  Corpus prompts(std::size_t n, std::size_t length, std::uint64_t seed) const;

 private:
  TokenId next_token(TokenId prev, double u, std::uint64_t pick) const;

  SyntheticSourceSpec spec_;
  std::vector<std::vector<TokenId>> successors_;  // indexed by word id
};

}  // namespace waterjudge
