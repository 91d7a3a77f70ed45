#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "waterjudge/errors.hpp"
#include "waterjudge/harness.hpp"
#include "waterjudge/rng.hpp"

using namespace waterjudge;
using nlohmann::json;

namespace {

SweepConfig small_config(const std::string& extra = "{}") {
  json doc = json::parse(R"({"corpus":{"n_tokens":20000},"n_inputs":40,"grid":[{"g":0.5,"delta":4}]})");
  doc.merge_patch(json::parse(extra));
  auto v = validate_config(doc);
  REQUIRE(v.ok());
  return *v.config;
}

std::string csv_of(const std::vector<SweepRow>& rows) {
  std::ostringstream ss;
  write_sweep_csv(ss, rows);
  return ss.str();
}

std::string temp_path(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("wj_harness_" + name);
  std::filesystem::remove(p);
  return p.string();
}

}  // namespace

TEST_CASE("one grid point gives one row with sane fields") {
  const auto cfg = small_config();
  const auto lm = build_lm(cfg);
  const auto rows = run_sweep(cfg, lm);
  REQUIRE(rows.size() == 1);
  const auto& r = rows[0];
  CHECK(r.seed == 15485863);
  CHECK(r.f05 >= 0.0);
  CHECK(r.f05 <= 1.0);
  CHECK(r.s_q >= 0.0);
  CHECK(r.s_q <= 1.0);
  CHECK(r.mean_len > 0.0);
  CHECK(r.mean_score_wm > r.mean_score_base);
  CHECK(r.n_outputs == 40);
}

TEST_CASE("delta 0 with a shared rng gives identical texts and s_q exactly 0.5") {
  const auto cfg = small_config(R"({"grid":[{"g":1,"delta":0},{"g":0.5,"delta":0}]})");
  const auto lm = build_lm(cfg);
  for (const auto& r : run_sweep(cfg, lm)) {
    CHECK(r.s_q == 0.5);
    CHECK(r.mean_score_wm == r.mean_score_base);
    CHECK(r.mean_len == r.mean_len_base);
  }
}

TEST_CASE("sweeps are deterministic and independent of the worker count") {
  const auto cfg = small_config(R"({"grid":[{"g":0.25,"delta":2},{"g":0.5,"delta":1},{"g":0.75,"delta":6}],
                                    "hash_seeds":[1,2]})");
  const auto lm = build_lm(cfg);
  const auto a = csv_of(run_sweep(cfg, lm));
  SweepOptions par;
  par.jobs = 3;
  const auto b = csv_of(run_sweep(cfg, lm, par));
  CHECK(a == b);
  CHECK(a == csv_of(run_sweep(cfg, lm)));
  // grid-major, seed-minor
  std::istringstream in(a);
  const auto rows = read_sweep_csv(in);
  REQUIRE(rows.size() == 6);
  CHECK(rows[1].point.g == 0.25);
  CHECK(rows[1].seed == 2);
  CHECK(rows[2].point.g == 0.5);
}

TEST_CASE("CSV round trip") {
  SweepRow r;
  r.point = {0.1, 0.5};
  r.seed = 18446744073709551615ULL;
  r.f05 = 0.1 + 0.2;
  r.threshold = 1.0 + 1e-9;
  r.s_q = 0.5;
  r.mean_len = 59.5;
  r.mean_score_wm = 1.0 / 3;
  r.mean_score_base = 0.25;
  r.ppl_wm = 12.75;
  const auto text = csv_of({r});
  CHECK(text.rfind(std::string(kSweepCsvHeader) + "\n", 0) == 0);
  std::istringstream in(text);
  const auto back = read_sweep_csv(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].seed == r.seed);
  CHECK(back[0].f05 == r.f05);
  CHECK(back[0].threshold == r.threshold);
  CHECK(back[0].mean_score_wm == r.mean_score_wm);
  CHECK(csv_of(back) == text);
  std::istringstream bad("g,delta\n1,2\n");
  CHECK_THROWS_AS(read_sweep_csv(bad), DomainError);
}

TEST_CASE("grouped scoring with group_size 1 equals the per-text path") {
  const auto c1 = small_config(R"({"group_size":1})");
  const auto lm = build_lm(c1);
  const auto rows = run_sweep(c1, lm);
  const auto prompts = load_prompts(c1);
  const GreenListRule rule(c1.hash_seeds[0], 0.5, lm.vocab_size());
  double base_sum = 0.0;
  for (std::size_t i = 0; i < c1.n_inputs; ++i) {
    SamplerConfig s = c1.sampler;
    s.rng_seed = derive_seed(c1.sampler.rng_seed, i);
    base_sum += watermark_score(generate(lm, prompts[i], s), rule, prompts[i].back());
  }
  CHECK(rows[0].mean_score_base == doctest::Approx(base_sum / c1.n_inputs).epsilon(1e-14));

  const auto c3 = small_config(R"({"group_size":3})");
  const auto grouped = run_sweep(c3, lm);
  // Pooling cannot change the score order, only the sample count behind F0.5.
  CHECK(grouped[0].mean_score_wm > grouped[0].mean_score_base);
}

TEST_CASE("checkpoint resume skips finished rows") {
  const auto cfg = small_config(R"({"grid":[{"g":0.5,"delta":1},{"g":0.5,"delta":2},{"g":0.5,"delta":3}]})");
  const auto lm = build_lm(cfg);
  const auto full = csv_of(run_sweep(cfg, lm));

  const auto path = temp_path("ckpt.csv");
  // First run dies on the third point.
  int calls = 0;
  const auto prompts = load_prompts(cfg);
  FunctionJudge flaky([&](const ComparisonRequest& r) -> double {
    if (++calls > 2 * 2 * 40) throw TransportError("backend went away");
    const LikelihoodJudge inner(lm, Tokenizer(lm.vocab_size()), cfg.judge.scale);
    return inner.raw_preference(r);
  });
  SweepOptions opts;
  opts.checkpoint_csv = path;
  CHECK_THROWS_AS(run_sweep(cfg, lm, SweepInputs{prompts}, flaky, opts), TransportError);
  CHECK(read_sweep_csv_file(path).size() == 2);

  const LikelihoodJudge good(lm, Tokenizer(lm.vocab_size()), cfg.judge.scale);
  const auto resumed = run_sweep(cfg, lm, SweepInputs{prompts}, good, opts);
  CHECK(csv_of(resumed) == full);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == full);
}

TEST_CASE("seed consistency") {
  SUBCASE("equal seeds give zero spread") {
    const auto cfg = small_config(R"({"hash_seeds":[9,9,9]})");
    const auto t = seed_consistency(cfg, build_lm(cfg));
    REQUIRE(t.spreads.size() == 1);
    CHECK(t.spreads[0].max_delta_f05 == 0.0);
    CHECK(t.spreads[0].max_delta_s_q == 0.0);
    CHECK(t.rows.size() == 3);
  }
  SUBCASE("needs two seeds") {
    const auto cfg = small_config();
    CHECK_THROWS_AS(seed_consistency(cfg, build_lm(cfg)), DomainError);
  }
}

TEST_CASE("length statistics") {
  SUBCASE("constant lengths") {
    std::vector<SweepRow> rows(3);
    for (std::size_t i = 0; i < 3; ++i) {
      rows[i].point = {0.5, static_cast<double>(i)};
      rows[i].mean_len = 60.0;
      rows[i].mean_len_base = 60.0;
    }
    for (const auto& s : length_stats(rows)) {
      CHECK(s.mean == 60.0);
      CHECK(s.variance == 0.0);
      CHECK_FALSE(s.flagged);
    }
  }
  SUBCASE("delta 0 rows are never flagged") {
    std::vector<SweepRow> rows(2);
    rows[0].point = {0.5, 0.0};
    rows[0].mean_len = 10.0;
    rows[1].point = {0.1, 0.0};
    rows[1].mean_len = 40.0;
    for (const auto& s : length_stats(rows)) CHECK_FALSE(s.flagged);
  }
  SUBCASE("end-of-sequence in the red list makes outputs run long") {
    // Documents end right after a period most of the time, so baseline outputs are short.
    auto cfg = small_config(R"({"corpus":{"synthetic":{"end_prob":0.95,"period_prob":0.3}}})");
    const auto lm = build_lm(cfg);
    std::uint64_t seed = 1;
    while (GreenListRule(seed, 0.1, lm.vocab_size()).is_green(1, 0)) ++seed;  // EOS red after '.'
    cfg.hash_seeds = {seed};
    cfg.grid = {{0.1, 0.0}, {0.1, 8.0}};
    const auto stats = length_stats(run_sweep(cfg, lm));
    REQUIRE(stats.size() == 2);
    CHECK_FALSE(stats[0].flagged);
    CHECK(stats[1].mean > 1.5 * stats[0].mean);
    CHECK(stats[1].flagged);
  }
}

TEST_CASE("manifest") {
  const auto cfg = small_config();
  const auto m = sweep_manifest(cfg, 1);
  CHECK(m["version"] == kToolkitVersion);
  CHECK(m["config_hash"] == config_hash(cfg));
  CHECK(m["rows"] == 1);
}

TEST_CASE("invalid sweep inputs") {
  auto cfg = small_config();
  const auto lm = build_lm(cfg);
  const MockJudge judge;
  CHECK_THROWS_AS(run_sweep(cfg, lm, SweepInputs{}, judge), DomainError);
  cfg.grid.clear();
  CHECK_THROWS_AS(run_sweep(cfg, lm, SweepInputs{load_prompts(small_config())}, judge), DomainError);
}
