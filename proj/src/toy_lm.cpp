#include "waterjudge/toy_lm.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "waterjudge/errors.hpp"
#include "waterjudge/kernels.hpp"
#include "waterjudge/rng.hpp"

namespace waterjudge {

void SamplerConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw DomainError("temperature must be > 0");
  if (max_tokens < 1) throw DomainError("max_tokens must be >= 1");
}

NGramLM::NGramLM(int order, std::uint32_t vocab_size, double alpha, TokenId bos)
    : order_(order), vocab_size_(vocab_size), alpha_(alpha), bos_(bos) {
  if (order < 1 || order > kMaxOrder) throw DomainError("n-gram order must be in [1, 5]");
  if (vocab_size < 2 || vocab_size > kMaxGreenListVocab) throw DomainError("vocab_size must be in [2, 65536]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("smoothing alpha must be > 0");
  if (bos >= vocab_size) throw DomainError("BOS id out of range");
}

void NGramLM::check_token(TokenId t) const {
  if (t >= vocab_size_) {
    throw DomainError("token id " + std::to_string(t) + " out of range for vocab_size " + std::to_string(vocab_size_));
  }
}

std::uint64_t NGramLM::key_of(std::span<const TokenId> context) const {
  const auto width = static_cast<std::size_t>(order_ - 1);
  std::uint64_t key = 0;
  for (std::size_t k = 0; k < width; ++k) {
    // Position k of the padded window; missing history is BOS.
    const std::size_t from_end = width - k;
    const TokenId t = context.size() >= from_end ? context[context.size() - from_end] : bos_;
    key = key * vocab_size_ + t;
  }
  return key;
}

const NGramLM::Row* NGramLM::find_row(std::span<const TokenId> context) const {
  const auto it = rows_.find(key_of(context));
  return it == rows_.end() ? nullptr : &it->second;
}

void NGramLM::observe(std::span<const TokenId> seq) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    check_token(seq[i]);
    auto& row = rows_[key_of(seq.first(i))];
    if (row.counts.empty()) row.counts.assign(vocab_size_, 0);
    ++row.counts[seq[i]];
    ++row.total;
  }
}

double NGramLM::probability(std::span<const TokenId> context, TokenId next) const {
  check_token(next);
  const double denom_alpha = alpha_ * vocab_size_;
  if (const Row* row = find_row(context)) {
    return (row->counts[next] + alpha_) / (static_cast<double>(row->total) + denom_alpha);
  }
  return 1.0 / vocab_size_;
}

std::uint32_t NGramLM::count(std::span<const TokenId> context, TokenId next) const {
  check_token(next);
  const Row* row = find_row(context);
  return row ? row->counts[next] : 0;
}

std::vector<double> NGramLM::log_probs(std::span<const TokenId> context) const {
  for (TokenId t : context) check_token(t);
  std::vector<double> out(vocab_size_);
  if (const Row* row = find_row(context)) {
    const double log_denom = std::log(static_cast<double>(row->total) + alpha_ * vocab_size_);
    for (std::uint32_t k = 0; k < vocab_size_; ++k) out[k] = std::log(row->counts[k] + alpha_) - log_denom;
  } else {
    out.assign(vocab_size_, -std::log(static_cast<double>(vocab_size_)));
  }
  return out;
}

nlohmann::json NGramLM::to_json() const {
  nlohmann::json counts = nlohmann::json::array();
  const auto width = static_cast<std::size_t>(order_ - 1);
  for (const auto& [key, row] : rows_) {
    std::vector<TokenId> ctx(width);
    std::uint64_t k = key;
    for (std::size_t i = width; i-- > 0;) {
      ctx[i] = static_cast<TokenId>(k % vocab_size_);
      k /= vocab_size_;
    }
    nlohmann::json entries = nlohmann::json::array();
    for (std::uint32_t t = 0; t < vocab_size_; ++t) {
      if (row.counts[t] != 0) entries.push_back({t, row.counts[t]});
    }
    counts.push_back({ctx, entries});
  }
  return {{"format", "waterjudge-ngram"}, {"version", kFormatVersion}, {"order", order_},
          {"vocab_size", vocab_size_},    {"alpha", alpha_},           {"bos", bos_},
          {"counts", counts}};
}

NGramLM NGramLM::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "waterjudge-ngram") throw DomainError("not an n-gram model file");
    if (j.at("version").get<int>() != kFormatVersion) throw DomainError("unsupported n-gram model version");
    NGramLM lm(j.at("order").get<int>(), j.at("vocab_size").get<std::uint32_t>(), j.at("alpha").get<double>(),
               j.at("bos").get<TokenId>());
    const auto width = static_cast<std::size_t>(lm.order_ - 1);
    for (const auto& entry : j.at("counts")) {
      const auto ctx = entry.at(0).get<std::vector<TokenId>>();
      if (ctx.size() != width) throw DomainError("context width does not match order");
      for (TokenId t : ctx) lm.check_token(t);
      auto& row = lm.rows_[lm.key_of(ctx)];
      row.counts.assign(lm.vocab_size_, 0);
      for (const auto& tc : entry.at(1)) {
        const auto t = tc.at(0).get<TokenId>();
        lm.check_token(t);
        const auto c = tc.at(1).get<std::uint32_t>();
        row.counts[t] = c;
        row.total += c;
      }
    }
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed n-gram model: ") + e.what());
  }
}

NGramLM train(const Corpus& corpus, int order, double alpha, std::uint32_t vocab_size, std::optional<TokenId> bos) {
  if (corpus.empty()) throw DomainError("train: empty corpus");
  NGramLM lm(order, vocab_size, alpha, bos.value_or(vocab_size - 1));
  for (const auto& seq : corpus) lm.observe(seq);
  return lm;
}

std::vector<double> logits(const NGramLM& lm, std::span<const TokenId> context) {
  return lm.log_probs(context);
}

std::vector<double> next_token_distribution(const NGramLM& lm, std::span<const TokenId> context,
                                            const SamplerConfig& cfg, const Watermark* wm) {
  std::vector<double> l = lm.log_probs(context);
  if (wm) {
    if (context.empty()) throw DomainError("watermarked sampling needs a non-empty context");
    l = apply_bias(l, wm->rule, context.back(), wm->delta);
  }
  const double inv_t = 1.0 / cfg.temperature;
  const double top = kernels::max_value(l);
  double sum = 0.0;
  for (auto& v : l) {
    v = std::exp((v - top) * inv_t);
    sum += v;
  }
  for (auto& v : l) v /= sum;
  return l;
}

TokenSeq generate(const NGramLM& lm, std::span<const TokenId> prompt, const SamplerConfig& cfg,
                  const std::optional<Watermark>& wm) {
  if (prompt.empty()) throw DomainError("generate: empty prompt");
  cfg.validate();
  if (wm && wm->rule.vocab_size() != lm.vocab_size()) throw DomainError("watermark rule vocab_size mismatch");

  SplitMix64 rng(cfg.rng_seed);
  TokenSeq seq(prompt.begin(), prompt.end());
  const std::size_t start = seq.size();
  for (std::uint32_t step = 0; step < cfg.max_tokens; ++step) {
    const auto probs = next_token_distribution(lm, seq, cfg, wm ? &*wm : nullptr);
    const double u = rng.uniform();
    double cum = 0.0;
    TokenId pick = static_cast<TokenId>(probs.size() - 1);
    for (std::size_t k = 0; k < probs.size(); ++k) {
      cum += probs[k];
      if (u < cum) {
        pick = static_cast<TokenId>(k);
        break;
      }
    }
    seq.push_back(pick);
    if (pick == cfg.eos_token) break;
  }
  return TokenSeq(seq.begin() + static_cast<std::ptrdiff_t>(start), seq.end());
}

double log_likelihood(const NGramLM& lm, std::span<const TokenId> tokens, std::span<const TokenId> prompt) {
  if (tokens.empty()) throw DomainError("log_likelihood: empty token sequence");
  for (TokenId t : prompt) {
    if (t >= lm.vocab_size()) throw DomainError("prompt token id " + std::to_string(t) + " out of range");
  }
  TokenSeq ctx(prompt.begin(), prompt.end());
  ctx.reserve(prompt.size() + tokens.size());
  double ll = 0.0;
  for (TokenId t : tokens) {
    ll += std::log(lm.probability(ctx, t));
    ctx.push_back(t);
  }
  return ll;
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    TokenSeq seq;
    std::string word;
    while (ls >> word) {
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(word, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != word.size() || word[0] == '-' || v > 0xFFFFFFFFul) {
        throw DomainError("corpus line " + std::to_string(lineno) + ": not a token id: '" + word + "'");
      }
      seq.push_back(static_cast<TokenId>(v));
    }
    if (!seq.empty()) corpus.push_back(std::move(seq));
  }
  return corpus;
}

Corpus read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open corpus file: " + path);
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << seq[i];
    }
    out << '\n';
  }
}

}  // namespace waterjudge
