#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "waterjudge/corpus.hpp"
#include "waterjudge/errors.hpp"
#include "waterjudge/toy_lm.hpp"

using namespace waterjudge;

namespace {

const Corpus kTiny{{2, 3, 2, 4, 0}, {2, 3, 5, 0}, {3, 2, 4, 0}};

NGramLM tiny_lm(int order = 2) { return train(kTiny, order, 0.5, 8); }

}  // namespace

TEST_CASE("add-alpha probabilities match hand counts") {
  const auto lm = tiny_lm(2);
  CHECK(lm.bos() == 7);
  // Bigram counts after token 2: 3 (x2), 4 (x2) -> total 4.
  const TokenSeq ctx{2};
  CHECK(lm.count(ctx, 3) == 2);
  CHECK(lm.count(ctx, 4) == 2);
  CHECK(lm.probability(ctx, 3) == doctest::Approx((2 + 0.5) / (4 + 0.5 * 8)));
  CHECK(lm.probability(ctx, 6) == doctest::Approx(0.5 / (4 + 0.5 * 8)));
  // Start-of-sequence context is BOS: first tokens are 2, 2, 3.
  const TokenSeq empty;
  CHECK(lm.probability(empty, 2) == doctest::Approx((2 + 0.5) / (3 + 4.0)));
  // Unseen context falls back to uniform.
  const TokenSeq unseen{6};
  CHECK(lm.probability(unseen, 1) == doctest::Approx(1.0 / 8));
}

TEST_CASE("trigram uses the last two tokens with BOS padding") {
  const auto lm = tiny_lm(3);
  const TokenSeq ctx{9 % 8, 2, 3};  // only (2, 3) matters
  CHECK(lm.count(ctx, 2) == 1);
  CHECK(lm.count(ctx, 5) == 1);
  const TokenSeq one{2};  // (BOS, 2)
  CHECK(lm.count(one, 3) == 2);
}

TEST_CASE("distributions are normalized") {
  const auto lm = tiny_lm(3);
  for (const TokenSeq& ctx : {TokenSeq{}, TokenSeq{2}, TokenSeq{2, 3}, TokenSeq{6, 6}}) {
    const auto lp = logits(lm, ctx);
    double s = 0.0;
    for (double v : lp) s += std::exp(v);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  SamplerConfig cfg;
  cfg.temperature = 0.7;
  const auto p = next_token_distribution(lm, TokenSeq{2}, cfg, nullptr);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("watermarked distribution equals softmax of biased logits") {
  const auto lm = tiny_lm(2);
  const Watermark wm{GreenListRule(5, 0.5, 8), BiasDelta(1.7)};
  const TokenSeq ctx{2};
  const auto p = next_token_distribution(lm, ctx, SamplerConfig{}, &wm);
  const auto lp = logits(lm, ctx);
  std::vector<double> e(8);
  double z = 0.0;
  for (TokenId k = 0; k < 8; ++k) {
    e[k] = std::exp(lp[k] + (wm.rule.is_green(2, k) ? 1.7 : 0.0));
    z += e[k];
  }
  for (TokenId k = 0; k < 8; ++k) CHECK(p[k] == doctest::Approx(e[k] / z).epsilon(1e-12));
}

TEST_CASE("generation") {
  const SyntheticSource src(SyntheticSourceSpec{});
  const auto lm = train(src.corpus(20000, 1), 3, 0.01, 128);
  const auto prompts = src.prompts(10, 8, 2);
  SamplerConfig cfg;
  cfg.rng_seed = 1234;

  SUBCASE("deterministic under a seed") {
    CHECK(generate(lm, prompts[0], cfg) == generate(lm, prompts[0], cfg));
  }
  SUBCASE("delta 0 reproduces the unwatermarked text") {
    const Watermark wm{GreenListRule(9, 0.5, 128), BiasDelta(0.0)};
    for (const auto& p : prompts) CHECK(generate(lm, p, cfg, wm) == generate(lm, p, cfg));
  }
  SUBCASE("stops at EOS (kept) or max_tokens") {
    cfg.max_tokens = 25;
    for (const auto& p : prompts) {
      const auto out = generate(lm, p, cfg);
      CHECK(!out.empty());
      CHECK(out.size() <= 25);
      for (std::size_t i = 0; i + 1 < out.size(); ++i) CHECK(out[i] != kEosToken);
      if (out.size() < 25) CHECK(out.back() == kEosToken);
    }
  }
  SUBCASE("bias raises the green fraction") {
    const Watermark wm{GreenListRule(9, 0.5, 128), BiasDelta(6.0)};
    double base = 0.0;
    double marked = 0.0;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      cfg.rng_seed = i;
      base += watermark_score(generate(lm, prompts[i], cfg), wm.rule, prompts[i].back());
      marked += watermark_score(generate(lm, prompts[i], cfg, wm), wm.rule, prompts[i].back());
    }
    CHECK(marked > base + 2.0);
  }
  SUBCASE("invalid sampler settings") {
    cfg.temperature = 0.0;
    CHECK_THROWS_AS(generate(lm, prompts[0], cfg), DomainError);
    CHECK_THROWS_AS(generate(lm, TokenSeq{}, SamplerConfig{}), DomainError);
  }
}

TEST_CASE("log likelihood sums conditional log probabilities") {
  const auto lm = tiny_lm(2);
  const TokenSeq prompt{3};
  const TokenSeq toks{2, 4, 0};
  const double expect = std::log(lm.probability(TokenSeq{3}, 2)) + std::log(lm.probability(TokenSeq{3, 2}, 4)) +
                        std::log(lm.probability(TokenSeq{3, 2, 4}, 0));
  CHECK(log_likelihood(lm, toks, prompt) == doctest::Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(log_likelihood(lm, toks, TokenSeq{99}), DomainError);
}

TEST_CASE("model JSON round trip") {
  const auto lm = tiny_lm(3);
  const auto back = NGramLM::from_json(lm.to_json());
  CHECK(back.to_json() == lm.to_json());
  for (TokenId k = 0; k < 8; ++k) CHECK(back.probability(TokenSeq{2, 3}, k) == lm.probability(TokenSeq{2, 3}, k));
  auto bad = lm.to_json();
  bad["version"] = 99;
  CHECK_THROWS_AS(NGramLM::from_json(bad), DomainError);
}

TEST_CASE("model construction limits") {
  CHECK_THROWS_AS(NGramLM(0, 8, 0.1, 7), DomainError);
  CHECK_THROWS_AS(NGramLM(6, 8, 0.1, 7), DomainError);
  CHECK_THROWS_AS(NGramLM(2, 8, 0.0, 7), DomainError);
  CHECK_THROWS_AS(NGramLM(2, 8, 0.1, 8), DomainError);
  auto lm = tiny_lm(2);
  CHECK_THROWS_AS(lm.observe(TokenSeq{1, 8}), DomainError);
  CHECK_THROWS_AS(train(Corpus{}, 2, 0.1, 8), DomainError);
}

TEST_CASE("corpus file round trip") {
  std::stringstream ss;
  write_corpus(ss, kTiny);
  CHECK(ss.str() == "2 3 2 4 0\n2 3 5 0\n3 2 4 0\n");
  CHECK(read_corpus(ss) == kTiny);
  std::stringstream bad("1 2 x\n");
  CHECK_THROWS_AS(read_corpus(bad), DomainError);
}

TEST_CASE("synthetic source") {
  const SyntheticSource src(SyntheticSourceSpec{});
  const auto c = src.corpus(5000, 3);
  std::size_t n = 0;
  for (const auto& d : c) {
    n += d.size();
    for (TokenId t : d) CHECK(t < 127);
  }
  CHECK(n >= 5000);
  CHECK(src.corpus(5000, 3) == c);
  const auto p = src.prompts(20, 8, 4);
  REQUIRE(p.size() == 20);
  for (const auto& q : p) {
    CHECK(q.size() == 8);
    for (TokenId t : q) CHECK(t != kEosToken);
  }
}
