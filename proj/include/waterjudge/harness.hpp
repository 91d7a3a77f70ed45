#pragma once
// End-to-end sweep over watermark operating points.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "waterjudge/config.hpp"
#include "waterjudge/detection.hpp"
#include "waterjudge/judge.hpp"
#include "waterjudge/toy_lm.hpp"

namespace waterjudge {

struct SweepRow {
  OperatingPoint point;
  std::uint64_t seed = 0;
  double f05 = 0.0;
  double threshold = 0.0;
  double s_q = 0.0;
  double mean_len = 0.0;
  double mean_score_wm = 0.0;
  double mean_score_base = 0.0;
  double ppl_wm = 0.0;

  // Not part of the CSV; zero for rows read back from disk.
  double var_len = 0.0;
  double mean_len_base = 0.0;
  double se_score_wm = 0.0;
  double se_s_q = 0.0;
  std::size_t n_outputs = 0;
};

inline constexpr const char* kSweepCsvHeader =
    "g,delta,seed,f05,threshold,s_q,mean_len,mean_score_wm,mean_score_base,ppl_wm";

std::string format_csv_row(const SweepRow& row);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::istream& in);
std::vector<SweepRow> read_sweep_csv_file(const std::string& path);

// Everything a sweep consumes besides the config itself.
struct SweepInputs {
  Corpus prompts;
};

Corpus load_prompts(const SweepConfig& cfg);
NGramLM build_lm(const SweepConfig& cfg);
std::unique_ptr<JudgeBackend> make_judge(const JudgeConfig& cfg, const NGramLM& lm);

struct SweepOptions {
  std::size_t jobs = 1;
  // Rows are appended here after each operating point; rows already present are skipped on rerun.
  std::optional<std::string> checkpoint_csv;
};

// One row per (grid point, hash seed), grid-major. Base and watermarked outputs for input i share
// rng seed derive_seed(sampler.rng_seed, i).
std::vector<SweepRow> run_sweep(const SweepConfig& cfg, const NGramLM& lm, const SweepInputs& inputs,
                                const JudgeBackend& judge, const SweepOptions& opts = {});
// Builds prompts and the judge from the config.
std::vector<SweepRow> run_sweep(const SweepConfig& cfg, const NGramLM& lm, const SweepOptions& opts = {});

struct SeedSpread {
  OperatingPoint point;
  double max_delta_f05 = 0.0;
  double max_delta_s_q = 0.0;
};

struct SeedConsistencyTable {
  std::vector<SweepRow> rows;
  std::vector<SeedSpread> spreads;  // grid order
};

SeedConsistencyTable summarize_seed_consistency(const std::vector<SweepRow>& rows);
// Requires >= 2 hash seeds.
SeedConsistencyTable seed_consistency(const SweepConfig& cfg, const NGramLM& lm, const SweepOptions& opts = {});

struct LengthStat {
  OperatingPoint point;
  double mean = 0.0;
  double variance = 0.0;
  double baseline = 0.0;  // 0 when unknown
  bool flagged = false;   // mean > 1.5 x baseline
};

inline constexpr double kLengthFlagRatio = 1.5;

std::vector<LengthStat> length_stats(const std::vector<SweepRow>& rows);

nlohmann::json sweep_manifest(const SweepConfig& cfg, std::size_t n_rows);

}  // namespace waterjudge
