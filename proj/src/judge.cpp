#include "waterjudge/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

namespace waterjudge {

std::string_view to_string(TaskTag tag) noexcept {
  switch (tag) {
    case TaskTag::summary:
      return "summary";
    case TaskTag::translation:
      return "translation";
    case TaskTag::generic:
      return "generic";
  }
  return "generic";
}

TaskTag parse_task_tag(std::string_view name) {
  if (name == "summary") return TaskTag::summary;
  if (name == "translation") return TaskTag::translation;
  if (name == "generic") return TaskTag::generic;
  throw DomainError("unknown task tag: " + std::string(name));
}

bool JudgeCapabilities::supports(TaskTag tag) const noexcept {
  for (auto t : tasks) {
    if (t == tag) return true;
  }
  return false;
}

void to_json(nlohmann::json& j, const QualityScore& q) {
  j = nlohmann::json{{"s_q", q.s_q}, {"n_samples", q.n_samples}, {"per_sample", q.per_sample}};
}

namespace {

double checked_preference(const JudgeBackend& backend, const ComparisonRequest& req) {
  const double p = backend.raw_preference(req);
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ProtocolError("judge backend returned probability outside [0, 1]: " + std::to_string(p));
  }
  return p;
}

}  // namespace

double pairwise_prob(const JudgeBackend& backend, const std::string& context, const std::string& y1,
                     const std::string& y2, TaskTag task) {
  if (!backend.capabilities().supports(task)) {
    throw DomainError("judge backend does not support task '" + std::string(to_string(task)) + "'");
  }
  if (y1.empty() || y2.empty()) throw DomainError("comparison candidates must be non-empty");
  const double forward = checked_preference(backend, {context, y1, y2, task});
  const double backward = checked_preference(backend, {context, y2, y1, task});
  return 0.5 * (forward + (1.0 - backward));
}

JudgeAbort::JudgeAbort(const std::string& what, std::string request_id, std::map<std::size_t, double> completed,
                       std::size_t failed_index)
    : TransportError(what, std::move(request_id)), completed_(std::move(completed)), failed_index_(failed_index) {}

QualityScore corpus_quality(const JudgeBackend& backend, std::span<const JudgePair> pairs, TaskTag task,
                            std::size_t jobs) {
  if (pairs.empty()) throw DomainError("corpus_quality: no pairs");
  const auto caps = backend.capabilities();
  if (!caps.supports(task)) {
    throw DomainError("judge backend does not support task '" + std::string(to_string(task)) + "'");
  }
  std::size_t workers = std::max<std::size_t>(1, caps.max_in_flight);
  if (jobs > 0) workers = std::min(workers, jobs);
  workers = std::min(workers, pairs.size());

  std::vector<double> results(pairs.size(), 0.0);
  std::vector<char> done(pairs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::exception_ptr first_error;
  std::size_t failed_index = 0;

  auto work = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pairs.size()) return;
      try {
        results[i] = pairwise_prob(backend, pairs[i].context, pairs[i].watermarked, pairs[i].base, task);
        done[i] = 1;
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error || i < failed_index) {
          first_error = std::current_exception();
          failed_index = i;
        }
        failed.store(true);
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  if (first_error) {
    std::map<std::size_t, double> completed;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (done[i]) completed.emplace(i, results[i]);
    }
    std::string what = "judge backend failed on pair " + std::to_string(failed_index);
    std::string id;
    try {
      std::rethrow_exception(first_error);
    } catch (const TransportError& e) {
      what += ": " + std::string(e.what());
      id = e.request_id();
    } catch (const std::exception& e) {
      what += ": " + std::string(e.what());
    }
    throw JudgeAbort(what, id, std::move(completed), failed_index);
  }

  QualityScore q;
  q.n_samples = pairs.size();
  q.per_sample = std::move(results);
  double sum = 0.0;
  for (double v : q.per_sample) sum += v;
  q.s_q = sum / static_cast<double>(q.n_samples);
  return q;
}

Tokenizer::Tokenizer(std::uint32_t vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 2) throw DomainError("tokenizer vocab_size must be >= 2");
}

TokenSeq Tokenizer::encode(std::string_view text) const {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    TokenId v = 0;
    const auto res = std::from_chars(text.data() + i, text.data() + j, v);
    if (res.ec != std::errc{} || res.ptr != text.data() + j || v >= vocab_size_) {
      throw DomainError("tokenization failed on '" + std::string(text.substr(i, j - i)) + "'");
    }
    out.push_back(v);
    i = j;
  }
  return out;
}

std::string Tokenizer::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += std::to_string(tokens[i]);
  }
  return out;
}

double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LikelihoodJudge::LikelihoodJudge(const NGramLM& lm, Tokenizer tokenizer, double scale, std::size_t max_in_flight)
    : lm_(&lm), tokenizer_(tokenizer), scale_(scale), max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("likelihood judge scale must be > 0");
  if (tokenizer.vocab_size() != lm.vocab_size()) throw DomainError("tokenizer / LM vocabulary mismatch");
}

JudgeCapabilities LikelihoodJudge::capabilities() const {
  JudgeCapabilities caps;
  caps.max_in_flight = max_in_flight_;
  return caps;
}

double LikelihoodJudge::per_token_log_likelihood(std::string_view text, std::string_view context) const {
  const auto tokens = tokenizer_.encode(text);
  if (tokens.empty()) throw DomainError("likelihood judge: empty candidate");
  const auto ctx = tokenizer_.encode(context);
  return log_likelihood(*lm_, tokens, ctx) / static_cast<double>(tokens.size());
}

double LikelihoodJudge::raw_preference(const ComparisonRequest& request) const {
  const double a = per_token_log_likelihood(request.candidate_a, request.context);
  const double b = per_token_log_likelihood(request.candidate_b, request.context);
  return logistic(scale_ * (a - b));
}

std::unique_ptr<JudgeBackend> likelihood_judge(const NGramLM& lm, const Tokenizer& tokenizer, double scale) {
  return std::make_unique<LikelihoodJudge>(lm, tokenizer, scale);
}

MockJudge::MockJudge(double sharpness, double position_bias) : sharpness_(sharpness), position_bias_(position_bias) {}

JudgeCapabilities MockJudge::capabilities() const {
  JudgeCapabilities caps;
  caps.max_in_flight = 16;
  return caps;
}

namespace {

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double overlap_fraction(std::string_view text, const std::set<std::string_view>& ctx) {
  const auto w = words(text);
  if (w.empty()) return 0.0;
  std::size_t hit = 0;
  for (auto x : w) hit += ctx.count(x);
  return static_cast<double>(hit) / static_cast<double>(w.size());
}

}  // namespace

double MockJudge::raw_preference(const ComparisonRequest& request) const {
  const auto cw = words(request.context);
  const std::set<std::string_view> ctx(cw.begin(), cw.end());
  const double a = overlap_fraction(request.candidate_a, ctx);
  const double b = overlap_fraction(request.candidate_b, ctx);
  return logistic(sharpness_ * (a - b) + position_bias_);
}

FunctionJudge::FunctionJudge(Fn fn, JudgeCapabilities caps) : fn_(std::move(fn)), caps_(std::move(caps)) {}

double perplexity_metric(const NGramLM& lm, std::span<const TokenSeq> texts, std::span<const TokenSeq> prompts) {
  if (texts.empty()) throw DomainError("perplexity_metric: empty corpus");
  if (!prompts.empty() && prompts.size() != texts.size()) throw DomainError("perplexity_metric: prompt count mismatch");
  double ll = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::span<const TokenId> prompt = prompts.empty() ? std::span<const TokenId>{} : prompts[i];
    ll += log_likelihood(lm, texts[i], prompt);
    n += texts[i].size();
  }
  return std::exp(-ll / static_cast<double>(n));
}

}  // namespace waterjudge
