#pragma once
// Pairwise comparative quality judging with permutation averaging.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "waterjudge/errors.hpp"
#include "waterjudge/toy_lm.hpp"

namespace waterjudge {

enum class TaskTag { summary, translation, generic };

std::string_view to_string(TaskTag tag) noexcept;
TaskTag parse_task_tag(std::string_view name);

struct ComparisonRequest {
  std::string context;
  std::string candidate_a;
  std::string candidate_b;
  TaskTag task = TaskTag::generic;
};

struct JudgeCapabilities {
  std::vector<TaskTag> tasks{TaskTag::summary, TaskTag::translation, TaskTag::generic};
  std::size_t max_in_flight = 1;

  bool supports(TaskTag tag) const noexcept;
};

// A backend returns P(candidate_a is better | context) for the order presented,
// already normalized into [0, 1]. Implementations must be callable concurrently
// up to capabilities().max_in_flight.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual JudgeCapabilities capabilities() const = 0;
  virtual double raw_preference(const ComparisonRequest& request) const = 0;
};

struct QualityScore {
  double s_q = 0.0;
  std::size_t n_samples = 0;
  std::vector<double> per_sample;
};

void to_json(nlohmann::json& j, const QualityScore& q);

struct JudgePair {
  std::string context;
  std::string watermarked;
  std::string base;
};

// 0.5 * [raw(y1 as A, y2 as B) + 1 - raw(y2 as A, y1 as B)]
double pairwise_prob(const JudgeBackend& backend, const std::string& context, const std::string& y1,
                     const std::string& y2, TaskTag task);

// Raised when a backend fails mid-corpus; carries the comparisons that did finish.
class JudgeAbort : public TransportError {
 public:
  JudgeAbort(const std::string& what, std::string request_id, std::map<std::size_t, double> completed,
             std::size_t failed_index);
  const std::map<std::size_t, double>& completed() const noexcept { return completed_; }
  std::size_t failed_index() const noexcept { return failed_index_; }

 private:
  std::map<std::size_t, double> completed_;
  std::size_t failed_index_;
};

// Mean of pairwise_prob(context_i, watermarked_i, base_i). The watermarked text is always y1.
// Up to min(jobs, backend max_in_flight) comparisons run concurrently; jobs = 0 means the backend limit.
QualityScore corpus_quality(const JudgeBackend& backend, std::span<const JudgePair> pairs, TaskTag task,
                            std::size_t jobs = 0);

// Whitespace-separated decimal token ids; the text form used by the toy pipeline.
class Tokenizer {
 public:
  explicit Tokenizer(std::uint32_t vocab_size);

  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  TokenSeq encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> tokens) const;

 private:
  std::uint32_t vocab_size_;
};

// raw = logistic(scale * (ll_per_token(A) - ll_per_token(B))), both conditioned on the context.
// Holds a reference to `lm`, which must outlive the backend.
class LikelihoodJudge final : public JudgeBackend {
 public:
  LikelihoodJudge(const NGramLM& lm, Tokenizer tokenizer, double scale, std::size_t max_in_flight = 8);

  JudgeCapabilities capabilities() const override;
  double raw_preference(const ComparisonRequest& request) const override;

  double per_token_log_likelihood(std::string_view text, std::string_view context) const;

 private:
  const NGramLM* lm_;
  Tokenizer tokenizer_;
  double scale_;
  std::size_t max_in_flight_;
};

std::unique_ptr<JudgeBackend> likelihood_judge(const NGramLM& lm, const Tokenizer& tokenizer, double scale);

// Deterministic offline judge: prefers the candidate whose words overlap more with the
// context (length-normalized), plus a fixed bias toward whichever text is shown first.
class MockJudge final : public JudgeBackend {
 public:
  explicit MockJudge(double sharpness = 4.0, double position_bias = 0.3);

  JudgeCapabilities capabilities() const override;
  double raw_preference(const ComparisonRequest& request) const override;

 private:
  double sharpness_;
  double position_bias_;
};

// Adapts any callable; used for scripted backends.
class FunctionJudge final : public JudgeBackend {
 public:
  using Fn = std::function<double(const ComparisonRequest&)>;
  explicit FunctionJudge(Fn fn, JudgeCapabilities caps = {});

  JudgeCapabilities capabilities() const override { return caps_; }
  double raw_preference(const ComparisonRequest& request) const override { return fn_(request); }

 private:
  Fn fn_;
  JudgeCapabilities caps_;
};

double logistic(double x) noexcept;

// exp(-(sum ll) / (sum lengths)) pooled over the corpus. Prompts, when given, condition each text.
double perplexity_metric(const NGramLM& lm, std::span<const TokenSeq> texts,
                         std::span<const TokenSeq> prompts = {});

}  // namespace waterjudge
