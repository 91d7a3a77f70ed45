#include "waterjudge/harness.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <semaphore>
#include <set>
#include <sstream>
#include <thread>

#include "waterjudge/corpus.hpp"
#include "waterjudge/errors.hpp"
#include "waterjudge/log.hpp"
#include "waterjudge/rng.hpp"

namespace waterjudge {

std::string format_csv_row(const SweepRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", r.point.g, r.point.delta, r.seed, r.f05, r.threshold, r.s_q,
                     r.mean_len, r.mean_score_wm, r.mean_score_base, r.ppl_wm);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << '\n';
  for (const auto& r : rows) out << format_csv_row(r) << '\n';
}

namespace {

double parse_double(const std::string& s, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DomainError("sweep CSV line " + std::to_string(lineno) + ": not a number: '" + s + "'");
}

std::string row_key(double g, double delta, std::uint64_t seed) { return fmt::format("{},{},{}", g, delta, seed); }

}  // namespace

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("sweep CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSweepCsvHeader) throw DomainError("sweep CSV header mismatch: '" + line + "'");
  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw DomainError("sweep CSV line " + std::to_string(lineno) + ": expected 10 columns");
    SweepRow r;
    r.point.g = parse_double(cells[0], lineno);
    r.point.delta = parse_double(cells[1], lineno);
    r.seed = parse_u64_string(cells[2]);
    r.f05 = parse_double(cells[3], lineno);
    r.threshold = parse_double(cells[4], lineno);
    r.s_q = parse_double(cells[5], lineno);
    r.mean_len = parse_double(cells[6], lineno);
    r.mean_score_wm = parse_double(cells[7], lineno);
    r.mean_score_base = parse_double(cells[8], lineno);
    r.ppl_wm = parse_double(cells[9], lineno);
    rows.push_back(r);
  }
  return rows;
}

std::vector<SweepRow> read_sweep_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open sweep CSV: " + path);
  return read_sweep_csv(in);
}

Corpus load_prompts(const SweepConfig& cfg) {
  Corpus prompts;
  if (cfg.prompts.path) {
    prompts = read_corpus_file(*cfg.prompts.path);
  } else {
    prompts = SyntheticSource(cfg.corpus.synthetic).prompts(cfg.n_inputs, cfg.prompts.length, cfg.prompts.seed);
  }
  if (prompts.empty()) throw DomainError("no prompts available");
  return prompts;
}

NGramLM build_lm(const SweepConfig& cfg) {
  if (cfg.lm.path) {
    std::ifstream in(*cfg.lm.path);
    if (!in) throw DomainError("cannot open LM file: " + *cfg.lm.path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DomainError("LM file is not valid JSON: " + *cfg.lm.path);
    return NGramLM::from_json(j);
  }
  const auto vocab = cfg.corpus.synthetic.vocab_size;
  const Corpus corpus = cfg.corpus.path ? read_corpus_file(*cfg.corpus.path)
                                        : SyntheticSource(cfg.corpus.synthetic).corpus(cfg.corpus.n_tokens, cfg.corpus.seed);
  return train(corpus, cfg.lm.order, cfg.lm.alpha, vocab);
}

std::unique_ptr<JudgeBackend> make_judge(const JudgeConfig& cfg, const NGramLM& lm) {
  switch (cfg.type) {
    case JudgeConfig::Type::likelihood:
      return std::make_unique<LikelihoodJudge>(lm, Tokenizer(lm.vocab_size()), cfg.scale);
    case JudgeConfig::Type::mock:
      return std::make_unique<MockJudge>(cfg.mock_sharpness, cfg.mock_position_bias);
    case JudgeConfig::Type::external:
      if (!cfg.endpoint) throw ConfigError("external judge needs an endpoint");
      return external_judge_client(*cfg.endpoint);
  }
  throw ConfigError("unknown judge type");
}

namespace {

// Caps concurrent calls into the wrapped backend at its declared limit across all sweep workers.
class InFlightLimiter final : public JudgeBackend {
 public:
  explicit InFlightLimiter(const JudgeBackend& inner)
      : inner_(inner), caps_(inner.capabilities()), slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, caps_.max_in_flight))) {}

  JudgeCapabilities capabilities() const override { return caps_; }
  double raw_preference(const ComparisonRequest& request) const override {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};
    return inner_.raw_preference(request);
  }

 private:
  const JudgeBackend& inner_;
  JudgeCapabilities caps_;
  mutable std::counting_semaphore<> slots_;
};

struct Summary {
  double mean = 0.0;
  double variance = 0.0;  // sample variance, 0 for n < 2
};

Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.variance = ss / static_cast<double>(v.size() - 1);
  }
  return s;
}

struct SweepContext {
  const SweepConfig& cfg;
  const NGramLM& lm;
  const JudgeBackend& judge;
  Tokenizer tokenizer;
  std::vector<TokenSeq> prompts;  // n_inputs, cycled from the supplied prompts
  std::vector<std::string> prompt_texts;
  std::vector<TokenSeq> base;
  std::vector<std::string> base_texts;
  std::size_t jobs = 1;  // judge concurrency per row; the sweep's --jobs

  SamplerConfig sampler_for(std::size_t i) const {
    SamplerConfig s = cfg.sampler;
    s.rng_seed = derive_seed(cfg.sampler.rng_seed, i);
    return s;
  }
};

SweepRow compute_row(const SweepContext& ctx, const OperatingPoint& point, std::uint64_t seed) {
  const auto& cfg = ctx.cfg;
  const std::size_t n = ctx.prompts.size();
  const GreenListRule rule(seed, point.g, ctx.lm.vocab_size(), cfg.mode);
  const Watermark wm{rule, BiasDelta(point.delta)};

  std::vector<TokenSeq> outputs(n);
  for (std::size_t i = 0; i < n; ++i) outputs[i] = generate(ctx.lm, ctx.prompts[i], ctx.sampler_for(i), wm);

  std::vector<ScoredSample> samples;
  std::vector<double> wm_scores;
  std::vector<double> base_scores;
  for (std::size_t start = 0; start < n; start += cfg.group_size) {
    const std::size_t end = std::min(n, start + cfg.group_size);
    std::vector<TokenGroup> gw;
    std::vector<TokenGroup> gb;
    for (std::size_t i = start; i < end; ++i) {
      gw.push_back({outputs[i], ctx.prompts[i].back()});
      gb.push_back({ctx.base[i], ctx.prompts[i].back()});
    }
    wm_scores.push_back(grouped_score(gw, rule));
    base_scores.push_back(grouped_score(gb, rule));
    samples.push_back({base_scores.back(), false});
    samples.push_back({wm_scores.back(), true});
  }
  const auto report = best_threshold(samples, cfg.beta);

  std::vector<JudgePair> pairs(n);
  for (std::size_t i = 0; i < n; ++i) {
    pairs[i] = {ctx.prompt_texts[i], ctx.tokenizer.decode(outputs[i]), ctx.base_texts[i]};
  }
  const auto quality = corpus_quality(ctx.judge, pairs, cfg.task, ctx.jobs);

  std::vector<double> lengths(n);
  std::vector<double> base_lengths(n);
  for (std::size_t i = 0; i < n; ++i) {
    lengths[i] = static_cast<double>(outputs[i].size());
    base_lengths[i] = static_cast<double>(ctx.base[i].size());
  }
  const auto len = summarize(lengths);
  const auto sw = summarize(wm_scores);
  const auto sb = summarize(base_scores);
  const auto sq = summarize(quality.per_sample);

  SweepRow row;
  row.point = point;
  row.seed = seed;
  row.f05 = report.f_beta;
  row.threshold = report.threshold;
  row.s_q = quality.s_q;
  row.mean_len = len.mean;
  row.mean_score_wm = sw.mean;
  row.mean_score_base = sb.mean;
  row.ppl_wm = perplexity_metric(ctx.lm, outputs, ctx.prompts);
  row.var_len = len.variance;
  row.mean_len_base = summarize(base_lengths).mean;
  row.se_score_wm = std::sqrt(sw.variance / static_cast<double>(wm_scores.size()));
  row.se_s_q = std::sqrt(sq.variance / static_cast<double>(n));
  row.n_outputs = n;
  return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepConfig& cfg, const NGramLM& lm, const SweepInputs& inputs,
                                const JudgeBackend& judge, const SweepOptions& opts) {
  if (cfg.grid.empty()) throw DomainError("sweep grid is empty");
  if (cfg.n_inputs < 1) throw DomainError("n_inputs must be >= 1");
  if (cfg.group_size < 1) throw DomainError("group_size must be >= 1");
  if (cfg.hash_seeds.empty()) throw DomainError("at least one hash seed is required");
  if (inputs.prompts.empty()) throw DomainError("sweep needs at least one prompt");
  cfg.sampler.validate();
  if (cfg.sampler.eos_token >= lm.vocab_size()) throw DomainError("eos_token out of range for the LM");

  const InFlightLimiter limited(judge);
  SweepContext ctx{cfg, lm, limited, Tokenizer(lm.vocab_size()), {}, {}, {}, {}};
  ctx.jobs = std::max<std::size_t>(1, opts.jobs);
  for (std::size_t i = 0; i < cfg.n_inputs; ++i) {
    const auto& p = inputs.prompts[i % inputs.prompts.size()];
    if (p.empty()) throw DomainError("empty prompt at index " + std::to_string(i % inputs.prompts.size()));
    ctx.prompts.push_back(p);
    ctx.prompt_texts.push_back(ctx.tokenizer.decode(p));
  }
  for (std::size_t i = 0; i < cfg.n_inputs; ++i) {
    ctx.base.push_back(generate(lm, ctx.prompts[i], ctx.sampler_for(i)));
    ctx.base_texts.push_back(ctx.tokenizer.decode(ctx.base.back()));
  }

  struct Unit {
    OperatingPoint point;
    std::uint64_t seed;
  };
  std::vector<Unit> units;
  for (const auto& p : cfg.grid) {
    for (auto s : cfg.hash_seeds) units.push_back({p, s});
  }

  std::vector<std::optional<SweepRow>> results(units.size());
  std::ofstream checkpoint;
  if (opts.checkpoint_csv) {
    std::map<std::string, SweepRow> existing;
    if (std::filesystem::exists(*opts.checkpoint_csv) && std::filesystem::file_size(*opts.checkpoint_csv) > 0) {
      for (const auto& r : read_sweep_csv_file(*opts.checkpoint_csv)) existing[row_key(r.point.g, r.point.delta, r.seed)] = r;
      checkpoint.open(*opts.checkpoint_csv, std::ios::app);
    } else {
      checkpoint.open(*opts.checkpoint_csv, std::ios::trunc);
      checkpoint << kSweepCsvHeader << '\n';
    }
    if (!checkpoint) throw DomainError("cannot write checkpoint CSV: " + *opts.checkpoint_csv);
    for (std::size_t k = 0; k < units.size(); ++k) {
      const auto it = existing.find(row_key(units[k].point.g, units[k].point.delta, units[k].seed));
      if (it != existing.end()) results[k] = it->second;
    }
    if (!existing.empty()) logger()->info("resuming sweep: {} of {} rows already present", existing.size(), units.size());
  }
  const std::vector<bool> resumed = [&] {
    std::vector<bool> v(units.size());
    for (std::size_t k = 0; k < units.size(); ++k) v[k] = results[k].has_value();
    return v;
  }();

  std::mutex mu;
  std::size_t flushed = 0;
  auto flush_ready = [&] {
    while (flushed < units.size() && results[flushed]) {
      if (checkpoint.is_open() && !resumed[flushed]) checkpoint << format_csv_row(*results[flushed]) << '\n';
      ++flushed;
    }
    if (checkpoint.is_open()) checkpoint.flush();
  };

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  auto work = [&] {
    while (!failed.load()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= units.size()) return;
      if (resumed[k]) continue;
      try {
        auto row = compute_row(ctx, units[k].point, units[k].seed);
        logger()->debug("g={} delta={} seed={} f05={:.4f} s_q={:.4f}", row.point.g, row.point.delta, row.seed,
                        row.f05, row.s_q);
        std::lock_guard lock(mu);
        results[k] = std::move(row);
        flush_ready();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };

  {
    std::lock_guard lock(mu);
    flush_ready();
  }
  const std::size_t jobs = std::max<std::size_t>(1, opts.jobs);
  if (jobs == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);

  std::vector<SweepRow> rows;
  rows.reserve(units.size());
  for (auto& r : results) rows.push_back(std::move(*r));
  return rows;
}

std::vector<SweepRow> run_sweep(const SweepConfig& cfg, const NGramLM& lm, const SweepOptions& opts) {
  const SweepInputs inputs{load_prompts(cfg)};
  const auto judge = make_judge(cfg.judge, lm);
  return run_sweep(cfg, lm, inputs, *judge, opts);
}

SeedConsistencyTable summarize_seed_consistency(const std::vector<SweepRow>& rows) {
  SeedConsistencyTable table;
  table.rows = rows;
  std::vector<OperatingPoint> order;
  std::map<std::pair<double, double>, std::vector<const SweepRow*>> by_point;
  for (const auto& r : rows) {
    auto& v = by_point[{r.point.g, r.point.delta}];
    if (v.empty()) order.push_back(r.point);
    v.push_back(&r);
  }
  for (const auto& p : order) {
    const auto& v = by_point[{p.g, p.delta}];
    SeedSpread s{p, 0.0, 0.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        s.max_delta_f05 = std::max(s.max_delta_f05, std::abs(v[i]->f05 - v[j]->f05));
        s.max_delta_s_q = std::max(s.max_delta_s_q, std::abs(v[i]->s_q - v[j]->s_q));
      }
    }
    table.spreads.push_back(s);
  }
  return table;
}

SeedConsistencyTable seed_consistency(const SweepConfig& cfg, const NGramLM& lm, const SweepOptions& opts) {
  if (cfg.hash_seeds.size() < 2) throw DomainError("seed_consistency needs at least 2 hash seeds");
  return summarize_seed_consistency(run_sweep(cfg, lm, opts));
}

std::vector<LengthStat> length_stats(const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw DomainError("length_stats: no rows");
  double baseline = 0.0;
  {
    std::vector<double> zero_delta;
    std::vector<double> base;
    for (const auto& r : rows) {
      if (r.point.delta == 0.0) zero_delta.push_back(r.mean_len);
      if (r.mean_len_base > 0.0) base.push_back(r.mean_len_base);
    }
    if (!zero_delta.empty()) {
      baseline = summarize(zero_delta).mean;
    } else if (!base.empty()) {
      baseline = summarize(base).mean;
    }
  }

  std::vector<OperatingPoint> order;
  std::map<std::pair<double, double>, std::vector<const SweepRow*>> by_point;
  for (const auto& r : rows) {
    auto& v = by_point[{r.point.g, r.point.delta}];
    if (v.empty()) order.push_back(r.point);
    v.push_back(&r);
  }
  std::vector<LengthStat> out;
  for (const auto& p : order) {
    const auto& v = by_point[{p.g, p.delta}];
    LengthStat s;
    s.point = p;
    double sum = 0.0;
    for (const auto* r : v) sum += r->mean_len;
    s.mean = sum / static_cast<double>(v.size());
    // Equal-size seeds: total variance = mean within-seed variance + spread of seed means.
    double var = 0.0;
    for (const auto* r : v) var += r->var_len + (r->mean_len - s.mean) * (r->mean_len - s.mean);
    s.variance = var / static_cast<double>(v.size());
    s.baseline = baseline;
    s.flagged = p.delta != 0.0 && baseline > 0.0 && s.mean > kLengthFlagRatio * baseline;
    out.push_back(s);
  }
  return out;
}

nlohmann::json sweep_manifest(const SweepConfig& cfg, std::size_t n_rows) {
  return {{"toolkit", "waterjudge"},
          {"version", kToolkitVersion},
          {"config_hash", config_hash(cfg)},
          {"config", to_json(cfg)},
          {"csv_header", kSweepCsvHeader},
          {"threshold_selection", "in-sample"},
          {"rows", n_rows}};
}

}  // namespace waterjudge
