#include "waterjudge/corpus.hpp"

#include <algorithm>
#include <numeric>

#include "waterjudge/errors.hpp"
#include "waterjudge/rng.hpp"

namespace waterjudge {

SyntheticSource::SyntheticSource(SyntheticSourceSpec spec) : spec_(std::move(spec)) {
  if (spec_.vocab_size < 8) throw DomainError("synthetic source needs vocab_size >= 8");
  if (spec_.successor_weights.empty()) throw DomainError("synthetic source needs successor weights");
  if (!(spec_.period_prob >= 0.0 && spec_.period_prob < 1.0)) throw DomainError("period_prob must be in [0, 1)");
  if (!(spec_.end_prob > 0.0 && spec_.end_prob <= 1.0)) throw DomainError("end_prob must be in (0, 1]");
  const double wsum = std::accumulate(spec_.successor_weights.begin(), spec_.successor_weights.end(), 0.0);
  if (!(wsum > 0.0)) throw DomainError("successor weights must sum to a positive value");
  for (auto& w : spec_.successor_weights) w /= wsum;

  const TokenId first_word = 2;
  const TokenId n_words = spec_.vocab_size - 3;
  SplitMix64 rng(spec_.seed);
  successors_.assign(spec_.vocab_size, {});
  for (TokenId w = first_word; w < first_word + n_words; ++w) {
    auto& succ = successors_[w];
    while (succ.size() < spec_.successor_weights.size()) {
      const auto cand = static_cast<TokenId>(first_word + rng.below(n_words));
      if (cand != w && std::find(succ.begin(), succ.end(), cand) == succ.end()) succ.push_back(cand);
    }
  }
}

TokenId SyntheticSource::next_token(TokenId prev, double u, std::uint64_t pick) const {
  const TokenId n_words = spec_.vocab_size - 3;
  if (prev == kPeriodToken) {
    if (u < spec_.end_prob) return kEosToken;
    return static_cast<TokenId>(2 + pick % n_words);
  }
  if (prev == bos()) return static_cast<TokenId>(2 + pick % n_words);
  if (u < spec_.period_prob) return kPeriodToken;
  double r = (u - spec_.period_prob) / (1.0 - spec_.period_prob);
  const auto& succ = successors_[prev];
  for (std::size_t k = 0; k < succ.size(); ++k) {
    if (r < spec_.successor_weights[k]) return succ[k];
    r -= spec_.successor_weights[k];
  }
  return succ.back();
}

TokenSeq SyntheticSource::sample_document(std::uint64_t seed) const {
  SplitMix64 rng(seed);
  TokenSeq doc;
  TokenId prev = bos();
  while (doc.size() < spec_.max_doc_len) {
    const double u = rng.uniform();
    const TokenId t = next_token(prev, u, rng.next());
    doc.push_back(t);
    if (t == kEosToken) break;
    prev = t;
  }
  return doc;
}

Corpus SyntheticSource::corpus(std::size_t n_tokens, std::uint64_t seed) const {
  Corpus out;
  std::size_t emitted = 0;
  for (std::uint64_t i = 0; emitted < n_tokens; ++i) {
    out.push_back(sample_document(derive_seed(seed, i)));
    emitted += out.back().size();
  }
  return out;
}

Corpus SyntheticSource::prompts(std::size_t n, std::size_t length, std::uint64_t seed) const {
  if (length == 0) throw DomainError("prompt length must be >= 1");
  Corpus out;
  for (std::uint64_t i = 0; out.size() < n; ++i) {
    if (i > 100 * (n + 10)) throw DomainError("could not cut prompts of the requested length");
    const auto doc = sample_document(derive_seed(seed, i));
    if (doc.size() <= length) continue;
    TokenSeq p(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(length));
    if (std::find(p.begin(), p.end(), kEosToken) != p.end()) continue;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace waterjudge
