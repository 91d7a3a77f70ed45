// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "waterjudge/analysis.hpp"
#include "waterjudge/config.hpp"
#include "waterjudge/detection.hpp"
#include "waterjudge/harness.hpp"
#include "waterjudge/judge.hpp"
#include "waterjudge/rng.hpp"
#include "waterjudge/toy_lm.hpp"
#include "waterjudge/wm_core.hpp"

using namespace waterjudge;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail = what;
      pass = false;
    }
  }
};

using Clock = std::chrono::steady_clock;

int g_failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s) o.require(false, fmt::format("runtime {:.2f}s over budget {:.0f}s", secs, budget_s));
  if (!o.pass) ++g_failures;
  fmt::print("{} {} ({:.2f}s){}{}\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.empty() ? "" : ": ", o.detail);
  std::fflush(stdout);
}

SweepConfig default_config() {
  auto v = validate_config(nlohmann::json::object());
  return *v.config;
}

// ---- partitions ----

Outcome partitions() {
  Outcome o;
  constexpr std::uint32_t kV = 256;
  const std::vector<double> gs{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  SplitMix64 rng(0xACCE97);
  for (int s = 0; s < 20; ++s) {
    const std::uint64_t seed = rng.next();
    std::vector<GreenListRule> hash_rules;
    for (double g : gs) hash_rules.emplace_back(seed, g, kV, PartitionMode::hash_threshold);
    for (TokenId prev = 0; prev < kV; ++prev) {
      std::vector<std::uint8_t> prev_mask;
      for (const auto& rule : hash_rules) {
        const auto mask = rule.green_mask(prev);
        const auto list = rule.green_list(prev);
        // Cover: every token is green xor red, and the list is exactly the green set.
        std::size_t n_green = 0;
        for (TokenId c = 0; c < kV; ++c) {
          o.require(mask[c] <= 1, "mask entry not 0/1");
          o.require((mask[c] == 1) == rule.is_green(prev, c), "mask disagrees with is_green");
          n_green += mask[c];
        }
        o.require(list.size() == n_green, "green list size differs from mask");
        for (TokenId c : list) o.require(mask[c] == 1, "green list entry is red");
        if (!prev_mask.empty()) {
          for (TokenId c = 0; c < kV; ++c) o.require(!prev_mask[c] || mask[c], "green lists are not nested in g");
        }
        prev_mask = mask;
      }
      for (double g : gs) {
        const GreenListRule exact(seed, g, kV, PartitionMode::exact_partition);
        const auto list = exact.green_list(prev);
        const auto want = static_cast<std::size_t>(std::ceil(g * kV - 1e-9));
        o.require(list.size() == want, fmt::format("exact cardinality {} != {}", list.size(), want));
        const std::set<TokenId> uniq(list.begin(), list.end());
        o.require(uniq.size() == list.size(), "duplicate green ids");
        const auto mask = exact.green_mask(prev);
        std::size_t red = 0;
        for (TokenId c = 0; c < kV; ++c) red += mask[c] == 0;
        o.require(red + list.size() == kV, "exact partition is not a cover");
      }
    }
  }
  return o;
}

// ---- identities ----

Outcome identities(const NGramLM& lm) {
  Outcome o;
  SplitMix64 rng(31);
  const std::uint32_t v = lm.vocab_size();
  for (int t = 0; t < 200; ++t) {
    std::vector<double> logits(v);
    for (auto& x : logits) x = (rng.uniform() - 0.5) * 20;
    const GreenListRule rule(rng.next(), 0.05 + 0.9 * rng.uniform(), v);
    const auto out = apply_bias(logits, rule, static_cast<TokenId>(rng.below(v)), BiasDelta(0.0));
    o.require(out == logits, "delta=0 bias changed logits");
  }

  SamplerConfig s;
  const Watermark all_green{GreenListRule(15485863, 1.0, v), BiasDelta(4.0)};
  double worst = 0.0;
  for (TokenId a = 0; a < v; ++a) {
    for (TokenId b = 0; b < v; ++b) {
      const std::vector<TokenId> ctx{a, b};
      const auto p = next_token_distribution(lm, ctx, s, nullptr);
      const auto q = next_token_distribution(lm, ctx, s, &all_green);
      double tv = 0.0;
      for (std::uint32_t i = 0; i < v; ++i) tv += std::abs(p[i] - q[i]);
      worst = std::max(worst, 0.5 * tv);
    }
  }
  o.require(worst < 1e-9, fmt::format("g=1 TV distance {:.3g}", worst));

  auto cfg = default_config();
  cfg.grid = {{0.1, 0.0}, {0.5, 0.0}, {0.9, 0.0}, {1.0, 0.0}};
  for (const auto& r : run_sweep(cfg, lm)) {
    o.require(r.s_q == 0.5, fmt::format("delta=0 s_q = {:.17g} at g={}", r.s_q, r.point.g));
  }
  if (o.pass) o.detail = fmt::format("max TV {:.2g} over {} contexts", worst, v * v);
  return o;
}

// ---- detection oracle ----

struct Counts {
  double threshold;
  long long tp, fp, fn;
};

// Exact rational comparison of F0.5 = 5tp / (5tp + fn + 4fp); ties keep the larger threshold.
Counts brute_force(const std::vector<ScoredSample>& s) {
  std::set<double, std::greater<>> cands{kAboveAllThreshold};
  for (const auto& x : s) cands.insert(x.score);
  bool have = false;
  Counts best{};
  for (double t : cands) {
    Counts c{t, 0, 0, 0};
    for (const auto& x : s) {
      const bool flag = x.score >= t;
      if (x.is_watermarked) {
        ++(flag ? c.tp : c.fn);
      } else if (flag) {
        ++c.fp;
      }
    }
    if (!have || 5 * c.tp * (5 * best.tp + best.fn + 4 * best.fp) > 5 * best.tp * (5 * c.tp + c.fn + 4 * c.fp)) {
      best = c;
      have = true;
    }
  }
  return best;
}

Outcome detection_oracle() {
  Outcome o;
  SplitMix64 rng(0xDE7EC7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    const std::uint64_t levels = 2 + rng.below(30);  // coarse grids force tied scores
    std::vector<ScoredSample> s(n);
    for (auto& x : s) {
      x.score = static_cast<double>(rng.below(levels + 1)) / static_cast<double>(levels);
      x.is_watermarked = rng.below(2) == 1;
    }
    s[0].is_watermarked = true;
    s[1].is_watermarked = false;
    const auto want = brute_force(s);
    const auto got = best_threshold(s);
    const double p = want.tp + want.fp == 0 ? 0.0 : static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fp);
    const double r = static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fn);
    o.require(got.threshold == want.threshold, fmt::format("trial {}: threshold {} vs {}", trial, got.threshold, want.threshold));
    o.require(got.f_beta == f_beta(p, r, 0.5), fmt::format("trial {}: f_beta mismatch", trial));
  }
  return o;
}

// ---- judge algebra ----

std::string random_text(SplitMix64& rng) {
  static const std::vector<std::string> words{"the", "cat", "sat", "on", "mat", "dog", "ran", "far", "and", "away"};
  std::string t;
  const std::size_t n = 1 + rng.below(12);
  for (std::size_t i = 0; i < n; ++i) t += (i ? " " : "") + words[rng.below(words.size())];
  return t;
}

Outcome judge_algebra() {
  Outcome o;
  SplitMix64 rng(0x7D9E);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const MockJudge judge(0.5 + 8 * rng.uniform(), rng.uniform() - 0.5);
    const auto ctx = random_text(rng);
    const auto a = random_text(rng);
    const auto b = random_text(rng);
    const double pab = pairwise_prob(judge, ctx, a, b, TaskTag::generic);
    const double pba = pairwise_prob(judge, ctx, b, a, TaskTag::generic);
    worst = std::max(worst, std::abs(pab + pba - 1.0));
    o.require(pairwise_prob(judge, ctx, a, a, TaskTag::generic) == 0.5, "identical texts did not score 0.5");
  }
  o.require(worst <= 1e-12, fmt::format("antisymmetry error {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("max |p(a,b)+p(b,a)-1| = {:.2g}", worst);
  return o;
}

// ---- frontier ----

double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

Outcome frontier(const NGramLM& lm) {
  Outcome o;
  auto cfg = default_config();
  o.require(cfg.lm.order == 3 && lm.vocab_size() == 128 && cfg.corpus.n_tokens >= 50000 && cfg.n_inputs == 200 &&
                cfg.sampler.max_tokens == 60,
            "default config is not the reference setup");
  cfg.grid = default_grid();
  cfg.grid.push_back({0.25, 0.5});
  cfg.grid.push_back({0.25, 8.0});
  SweepOptions opts;
  opts.jobs = 1;
  const auto rows = run_sweep(cfg, lm, opts);

  std::map<std::pair<double, double>, const SweepRow*> at;
  for (const auto& r : rows) at[{r.point.g, r.point.delta}] = &r;

  // (a) mean watermark score non-decreasing in delta at fixed g, within 2 SE.
  const auto deltas = default_delta_values();
  for (double g : default_g_values()) {
    for (std::size_t k = 1; k < deltas.size(); ++k) {
      const auto* lo = at.at({g, deltas[k - 1]});
      const auto* hi = at.at({g, deltas[k]});
      const double slack = 2 * combined_se(lo->se_score_wm, hi->se_score_wm);
      o.require(hi->mean_score_wm >= lo->mean_score_wm - slack,
                fmt::format("(a) score drops at g={} delta {}->{}: {:.4f} -> {:.4f}", g, deltas[k - 1], deltas[k],
                            lo->mean_score_wm, hi->mean_score_wm));
    }
  }
  // (b)
  const double f_hi = at.at({0.5, 8.0})->f05;
  const double f_lo = at.at({0.5, 0.5})->f05;
  o.require(f_hi >= 0.95, fmt::format("(b) F0.5(0.5, 8) = {:.4f} < 0.95", f_hi));
  o.require(f_lo <= 0.75, fmt::format("(b) F0.5(0.5, 0.5) = {:.4f} > 0.75", f_lo));
  // (c)
  const auto* q_lo = at.at({0.25, 0.5});
  const auto* q_hi = at.at({0.25, 8.0});
  const double gap = q_lo->s_q - q_hi->s_q;
  const double se = combined_se(q_lo->se_s_q, q_hi->se_s_q);
  o.require(gap > 2 * se, fmt::format("(c) s_q gap {:.4f} not beyond 2 SE ({:.4f})", gap, 2 * se));
  // (d)
  double max_sq = 0.0;
  for (const auto& r : rows) max_sq = std::max(max_sq, r.s_q);
  o.require(max_sq <= 0.55, fmt::format("(d) max s_q = {:.4f}", max_sq));

  if (o.pass) {
    o.detail = fmt::format("F0.5(0.5,8)={:.3f} F0.5(0.5,0.5)={:.3f} s_q gap {:.3f} (2SE {:.3f}) max s_q {:.3f}", f_hi,
                           f_lo, gap, 2 * se, max_sq);
  }
  return o;
}

Outcome seed_consistency_check(const NGramLM& lm) {
  Outcome o;
  auto cfg = default_config();
  cfg.grid = {{0.5, 4.0}};
  cfg.hash_seeds = {15485863, 32452843, 49979687};
  const auto table = seed_consistency(cfg, lm);
  o.require(table.spreads.size() == 1, "expected one operating point");
  const auto& s = table.spreads.front();
  o.require(s.max_delta_f05 < 0.1, fmt::format("max dF0.5 = {:.4f}", s.max_delta_f05));
  o.require(s.max_delta_s_q < 0.05, fmt::format("max ds_q = {:.4f}", s.max_delta_s_q));
  if (o.pass) o.detail = fmt::format("max dF0.5 = {:.4f}, max ds_q = {:.4f}", s.max_delta_f05, s.max_delta_s_q);
  return o;
}

// ---- curve fitting ----

Outcome curve_fitting() {
  Outcome o;
  const TanhCurve truth{0.15, 4.0, 0.7, 0.42};
  std::vector<Point2D> base;
  for (int i = 0; i < 15; ++i) {
    const double x = 0.4 + 0.6 * i / 14.0;
    base.push_back({x, truth(x)});
  }
  const auto fit = fit_tanh_curve(base);
  o.require(fit.residual < 1e-6, fmt::format("tanh residual {:.3g}", fit.residual));

  std::vector<double> xs, ys;
  for (int i = 0; i <= 20; ++i) {
    xs.push_back(i / 20.0);
    ys.push_back(std::min(0.5, i / 20.0));
  }
  const auto tl = fit_truncated_linear(xs, ys);
  o.require(std::abs(tl.slope - 1) < 1e-6 && std::abs(tl.intercept) < 1e-6 && std::abs(tl.cap - 0.5) < 1e-6,
            fmt::format("min(0.5, x) fit gave slope {} intercept {} cap {}", tl.slope, tl.intercept, tl.cap));

  // A target model whose detectability and quality are fixed truncated-linear images of the base.
  const TruncatedLinear detect_truth{0.9, 0.08, 0.97};
  const TruncatedLinear quality_truth{1.2, -0.1, 0.45};
  std::vector<double> bx, by, tx, ty;
  for (const auto& p : base) {
    bx.push_back(p.x);
    by.push_back(p.y);
    tx.push_back(detect_truth(p.x));
    ty.push_back(quality_truth(p.y));
  }
  const auto detect_map = fit_truncated_linear(bx, tx);
  const auto quality_map = fit_truncated_linear(by, ty);
  const auto poly = transfer_curve(fit.curve, quality_map, detect_map, bx.front(), bx.back());
  double worst = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) worst = std::max(worst, distance_to_polyline(poly, {tx[i], ty[i]}));
  o.require(worst < 1e-3, fmt::format("transfer misses target sweep by {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("tanh residual {:.2g}, transfer max distance {:.2g}", fit.residual, worst);
  return o;
}

// ---- correlations ----

long double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Average rank by counting: (#smaller) + (#equal + 1) / 2.
std::vector<double> oracle_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
  }
  return r;
}

bool has_spread(const std::vector<double>& v) { return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) != v.end(); }

Outcome correlations() {
  Outcome o;
  SplitMix64 rng(0xC0EE);
  double worst = 0.0;
  int tied = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + rng.below(60);
    const bool coarse = t % 2 == 0;
    std::vector<double> x(n), y(n);
    do {
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = coarse ? static_cast<double>(rng.below(5)) : rng.uniform() * 10 - 5;
        y[i] = coarse ? static_cast<double>(rng.below(4)) + 0.5 * x[i] : x[i] * 0.3 + rng.uniform();
      }
    } while (!has_spread(x) || !has_spread(y));
    tied += std::set<double>(x.begin(), x.end()).size() < n;
    const double p = pearson(x, y);
    const double s = spearman(x, y);
    worst = std::max(worst, std::abs(p - static_cast<double>(oracle_pearson(x, y))));
    worst = std::max(worst, std::abs(s - static_cast<double>(oracle_pearson(oracle_ranks(x), oracle_ranks(y)))));
  }
  o.require(worst <= 1e-12, fmt::format("max deviation {:.3g}", worst));
  o.require(tied >= 40, "too few vectors with ties");
  if (o.pass) o.detail = fmt::format("max deviation {:.2g}, {} of 100 with ties", worst, tied);
  return o;
}

}  // namespace

int main() {
  criterion("partition properties", 10, partitions);
  criterion("detection oracle", 30, detection_oracle);
  criterion("judge algebra", 0, judge_algebra);
  criterion("curve fitting and transfer", 0, curve_fitting);
  criterion("correlation ops", 0, correlations);

  const auto cfg = default_config();
  const auto lm = build_lm(cfg);
  criterion("identity suite", 0, [&] { return identities(lm); });
  criterion("frontier reproduction", 300, [&] { return frontier(lm); });
  criterion("seed consistency", 0, [&] { return seed_consistency_check(lm); });

  fmt::print("{} criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
