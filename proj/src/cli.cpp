#include "waterjudge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "waterjudge/analysis.hpp"
#include "waterjudge/config.hpp"
#include "waterjudge/detection.hpp"
#include "waterjudge/errors.hpp"
#include "waterjudge/harness.hpp"
#include "waterjudge/judge.hpp"
#include "waterjudge/log.hpp"
#include "waterjudge/plot.hpp"
#include "waterjudge/rng.hpp"
#include "waterjudge/toy_lm.hpp"
#include "waterjudge/wm_core.hpp"

namespace waterjudge::cli {

namespace {

using nlohmann::json;

void emit(const CommandSpec& spec, std::ostream& out, const std::function<void(std::ostream&)>& write) {
  if (!spec.output_path) {
    write(out);
    out.flush();
    return;
  }
  std::ofstream file(*spec.output_path, std::ios::binary | std::ios::trunc);
  if (!file) throw DomainError("cannot write " + *spec.output_path);
  write(file);
  if (!file) throw DomainError("write failed: " + *spec.output_path);
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& write) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DomainError("cannot write " + path);
  write(file);
}

std::ifstream open_input(const std::optional<std::string>& path, const char* flag) {
  if (!path) throw DomainError(std::string("missing required ") + flag);
  std::ifstream in(*path);
  if (!in) throw DomainError("cannot open " + *path);
  return in;
}

// Thrown after the individual validation messages have already been printed.
struct ConfigRejected : ConfigError {
  using ConfigError::ConfigError;
};

SweepConfig load_config(const CommandSpec& spec, std::ostream& err) {
  json doc = spec.config_path ? load_config_document(*spec.config_path) : json::object();
  auto overrides = spec.overrides;
  if (spec.seed) overrides.push_back(fmt::format("sampler.rng_seed=\"{}\"", *spec.seed));
  if (spec.model_path) overrides.push_back(fmt::format("lm.path={}", json(*spec.model_path).dump()));
  if (spec.prompts_path) overrides.push_back(fmt::format("prompts.path={}", json(*spec.prompts_path).dump()));
  apply_overrides(doc, overrides);
  auto v = validate_config(doc);
  for (const auto& w : v.warnings) fmt::print(err, "warning: {}\n", w);
  if (!v.ok()) {
    for (const auto& e : v.errors) fmt::print(err, "error: {}\n", e);
    throw ConfigRejected(fmt::format("{} config error(s)", v.errors.size()));
  }
  return *v.config;
}

Corpus first_n(Corpus c, std::size_t n) {
  if (c.size() > n) c.resize(n);
  return c;
}

std::uint64_t pick_hash_seed(const CommandSpec& spec, const SweepConfig& cfg) {
  return spec.hash_seed ? *spec.hash_seed : cfg.hash_seeds.front();
}

int cmd_train_lm(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  auto cfg = load_config(spec, err);
  cfg.lm.path.reset();
  const Corpus corpus = cfg.corpus.path ? read_corpus_file(*cfg.corpus.path)
                                        : SyntheticSource(cfg.corpus.synthetic).corpus(cfg.corpus.n_tokens, cfg.corpus.seed);
  const auto lm = train(corpus, cfg.lm.order, cfg.lm.alpha, cfg.corpus.synthetic.vocab_size);
  if (spec.corpus_out) write_file(*spec.corpus_out, [&](std::ostream& o) { write_corpus(o, corpus); });
  emit(spec, out, [&](std::ostream& o) { o << lm.to_json().dump() << '\n'; });
  logger()->info("trained order-{} model on {} documents, {} contexts", lm.order(), corpus.size(), lm.context_count());
  return kOk;
}

int cmd_generate(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(spec, err);
  const auto lm = build_lm(cfg);
  const auto prompts = first_n(load_prompts(cfg), cfg.n_inputs);
  std::optional<Watermark> wm;
  if (spec.g || spec.delta) {
    if (!spec.g || !spec.delta) throw DomainError("--g and --delta must be given together");
    wm = Watermark{GreenListRule(pick_hash_seed(spec, cfg), *spec.g, lm.vocab_size(), cfg.mode), BiasDelta(*spec.delta)};
  }
  Corpus outputs;
  outputs.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    SamplerConfig s = cfg.sampler;
    s.rng_seed = derive_seed(cfg.sampler.rng_seed, i);
    outputs.push_back(generate(lm, prompts[i], s, wm));
  }
  emit(spec, out, [&](std::ostream& o) { write_corpus(o, outputs); });
  return kOk;
}

int cmd_score(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(spec, err);
  if (!spec.g) throw DomainError("missing required --g");
  if (spec.group_size == 0) throw DomainError("--group-size must be positive");
  auto in = open_input(spec.input_path, "--input");
  const Corpus texts = read_corpus(in);
  const Corpus prompts = load_prompts(cfg);
  if (prompts.size() < texts.size()) {
    throw DomainError(fmt::format("{} texts but only {} prompts", texts.size(), prompts.size()));
  }
  const TokenId bos = cfg.corpus.synthetic.vocab_size - 1;
  const GreenListRule rule(pick_hash_seed(spec, cfg), *spec.g, cfg.corpus.synthetic.vocab_size, cfg.mode);
  emit(spec, out, [&](std::ostream& o) {
    o << "group,score,green,total\n";
    for (std::size_t start = 0, gi = 0; start < texts.size(); start += spec.group_size, ++gi) {
      const std::size_t end = std::min(texts.size(), start + spec.group_size);
      std::vector<TokenGroup> groups;
      GreenCount pooled;
      for (std::size_t i = start; i < end; ++i) {
        const TokenId last = prompts[i].empty() ? bos : prompts[i].back();
        groups.push_back({texts[i], last});
        const auto c = count_green(texts[i], rule, last);
        pooled.green += c.green;
        pooled.total += c.total;
      }
      fmt::print(o, "{},{},{},{}\n", gi, grouped_score(groups, rule), pooled.green, pooled.total);
    }
  });
  return kOk;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double to_double(const std::string& s, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DomainError(fmt::format("line {}: not a number: '{}'", lineno, s));
  }
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// "score,label" lines, label in {0,1}; an optional header is skipped.
std::vector<ScoredSample> read_labeled_scores(std::istream& in) {
  std::vector<ScoredSample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 2) throw DomainError(fmt::format("line {}: expected score,label", lineno));
    for (auto& c : cells) c = trim(c);
    if (lineno == 1 && cells[0] == "score") continue;
    const double score = to_double(cells[0], lineno);
    if (cells[1] != "0" && cells[1] != "1") throw DomainError(fmt::format("line {}: label must be 0 or 1", lineno));
    samples.push_back({score, cells[1] == "1"});
  }
  return samples;
}

int cmd_detect(const CommandSpec& spec, std::ostream& out, std::ostream&) {
  auto in = open_input(spec.input_path, "--input");
  const auto samples = read_labeled_scores(in);
  const auto report = best_threshold(samples, spec.beta);
  emit(spec, out, [&](std::ostream& o) { o << json(report).dump() << '\n'; });
  return kOk;
}

int cmd_judge(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(spec, err);
  auto in_wm = open_input(spec.input_path, "--input");
  auto in_base = open_input(spec.base_path, "--base");
  const Corpus wm = read_corpus(in_wm);
  const Corpus base = read_corpus(in_base);
  if (wm.size() != base.size()) throw DomainError("--input and --base have different line counts");
  const Corpus prompts = load_prompts(cfg);
  if (prompts.size() < wm.size()) throw DomainError("fewer prompts than texts");
  const auto lm = build_lm(cfg);
  const auto judge = make_judge(cfg.judge, lm);
  const Tokenizer tok(lm.vocab_size());
  std::vector<JudgePair> pairs;
  pairs.reserve(wm.size());
  for (std::size_t i = 0; i < wm.size(); ++i) pairs.push_back({tok.decode(prompts[i]), tok.decode(wm[i]), tok.decode(base[i])});
  const auto q = corpus_quality(*judge, pairs, cfg.task, spec.jobs);
  emit(spec, out, [&](std::ostream& o) { o << json(q).dump() << '\n'; });
  return kOk;
}

int cmd_sweep(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(spec, err);
  if (spec.print_config) {
    emit(spec, out, [&](std::ostream& o) { o << to_json(cfg).dump(2) << '\n'; });
    return kOk;
  }
  const auto lm = build_lm(cfg);
  SweepOptions opts;
  opts.jobs = std::max<std::size_t>(1, spec.jobs);
  opts.checkpoint_csv = spec.checkpoint_path;
  const auto rows = run_sweep(cfg, lm, opts);
  emit(spec, out, [&](std::ostream& o) { write_sweep_csv(o, rows); });
  if (spec.manifest_path) {
    write_file(*spec.manifest_path, [&](std::ostream& o) { o << sweep_manifest(cfg, rows.size()).dump(2) << '\n'; });
  }
  for (const auto& s : length_stats(rows)) {
    if (s.flagged) {
      logger()->warn("g={} delta={}: mean length {:.1f} exceeds {}x baseline {:.1f}", s.point.g, s.point.delta, s.mean,
                     kLengthFlagRatio, s.baseline);
    }
  }
  return kOk;
}

// Sweep CSVs give (f05, s_q); any other CSV must have x,y as its first two columns.
std::vector<Point2D> read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  std::string header;
  std::getline(in, header);
  header = trim(header);
  if (header == kSweepCsvHeader) {
    in.seekg(0);
    std::vector<Point2D> pts;
    for (const auto& r : read_sweep_csv(in)) pts.push_back({r.f05, r.s_q});
    return pts;
  }
  const auto cols = split_csv_line(header);
  if (cols.size() < 2 || trim(cols[0]) != "x" || trim(cols[1]) != "y") {
    throw DomainError(path + ": expected a sweep CSV or an x,y CSV");
  }
  std::vector<Point2D> pts;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 2) throw DomainError(fmt::format("{}:{}: expected x,y", path, lineno));
    pts.push_back({to_double(trim(cells[0]), lineno), to_double(trim(cells[1]), lineno)});
  }
  return pts;
}

int cmd_fit(const CommandSpec& spec, std::ostream& out, std::ostream&) {
  if (!spec.input_path) throw DomainError("missing required --input");
  const auto pts = read_points(*spec.input_path);
  const auto fit = fit_tanh_curve(pts);
  json j = fit;
  j["n_points"] = pts.size();
  emit(spec, out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  return kOk;
}

// Seed-averaged (f05, s_q) per operating point.
std::map<std::pair<double, double>, Point2D> point_means(const std::vector<SweepRow>& rows) {
  std::map<std::pair<double, double>, std::pair<Point2D, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& [p, n] = acc[{r.point.g, r.point.delta}];
    p.x += r.f05;
    p.y += r.s_q;
    ++n;
  }
  std::map<std::pair<double, double>, Point2D> out;
  for (const auto& [k, v] : acc) out[k] = {v.first.x / v.second, v.first.y / v.second};
  return out;
}

int cmd_transfer(const CommandSpec& spec, std::ostream& out, std::ostream&) {
  if (!spec.base_path) throw DomainError("missing required --base");
  if (!spec.target_path) throw DomainError("missing required --target");
  const auto a = point_means(read_sweep_csv_file(*spec.base_path));
  const auto b = point_means(read_sweep_csv_file(*spec.target_path));
  std::vector<Point2D> base_pts;
  std::vector<double> ax, ay, bx, by;
  for (const auto& [k, p] : a) {
    base_pts.push_back(p);
    const auto it = b.find(k);
    if (it == b.end()) continue;
    ax.push_back(p.x);
    ay.push_back(p.y);
    bx.push_back(it->second.x);
    by.push_back(it->second.y);
  }
  if (ax.size() < 3) throw DomainError("transfer needs at least 3 operating points shared by both sweeps");
  const auto fit = fit_tanh_curve(base_pts);
  const auto detect_map = fit_truncated_linear(ax, bx);
  const auto quality_map = fit_truncated_linear(ay, by);
  const auto [lo, hi] = std::minmax_element(ax.begin(), ax.end());
  const double x_lo = *lo;
  const double x_hi = *hi > *lo ? *hi : *lo + 1e-9;
  const auto poly = transfer_curve(fit.curve, quality_map, detect_map, x_lo, x_hi);
  json pj = json::array();
  for (const auto& p : poly) pj.push_back({p.x, p.y});
  const json j = {{"base_fit", fit},       {"detect_map", detect_map}, {"quality_map", quality_map},
                  {"x_range", {x_lo, x_hi}}, {"shared_points", ax.size()}, {"polyline", pj}};
  emit(spec, out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  return kOk;
}

int cmd_plot_data(const CommandSpec& spec, std::ostream& out, std::ostream&) {
  if (!spec.input_path) throw DomainError("missing required --input");
  const auto rows = read_sweep_csv_file(*spec.input_path);
  std::vector<PlotSeries> series;
  PlotLabels labels;
  if (spec.kind == "frontier") {
    series = frontier_series(rows);
    labels.title = "Quality vs detectability";
  } else if (spec.kind == "length") {
    series = length_series(rows);
    labels = {"Mean output length", "delta", "tokens"};
  } else {
    throw DomainError("--kind must be frontier or length");
  }
  if (spec.fit_path) {
    std::ifstream in(*spec.fit_path);
    if (!in) throw DomainError("cannot open " + *spec.fit_path);
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DomainError(*spec.fit_path + ": not valid JSON");
    const auto curve = tanh_curve_from_json(j);
    double lo = 0.0;
    double hi = 1.0;
    if (j.contains("x_range")) {
      lo = j["x_range"][0].get<double>();
      hi = j["x_range"][1].get<double>();
    }
    series.push_back(curve_series("tanh fit", curve, lo, hi));
  }
  emit(spec, out, [&](std::ostream& o) { write_plot_csv(o, series); });
  if (spec.svg_path) write_file(*spec.svg_path, [&](std::ostream& o) { write_svg(o, series, labels); });
  return kOk;
}

void add_common(CLI::App* sub, CommandSpec& spec) {
  sub->add_option("--config", spec.config_path, "JSON config file");
  sub->add_option("--out", spec.output_path, "Output file (default: stdout)");
  sub->add_option("--jobs", spec.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--seed", spec.seed, "Sampler rng seed");
  sub->add_option("--set", spec.overrides, "Config override key=value (repeatable)")->take_all();
}

}  // namespace

int dispatch(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  try {
    const auto& s = spec.subcommand;
    if (s == "train-lm") return cmd_train_lm(spec, out, err);
    if (s == "generate") return cmd_generate(spec, out, err);
    if (s == "score") return cmd_score(spec, out, err);
    if (s == "detect") return cmd_detect(spec, out, err);
    if (s == "judge") return cmd_judge(spec, out, err);
    if (s == "sweep") return cmd_sweep(spec, out, err);
    if (s == "fit") return cmd_fit(spec, out, err);
    if (s == "transfer") return cmd_transfer(spec, out, err);
    if (s == "plot-data") return cmd_plot_data(spec, out, err);
    fmt::print(err, "error: unknown subcommand '{}'\n", s);
    return kConfigError;
  } catch (const ConfigRejected&) {
    return kConfigError;
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kConfigError;
  } catch (const TransportError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kTransportError;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kDomainError;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Watermark quality/detectability toolkit", "waterjudge"};
  app.require_subcommand(1);
  CommandSpec spec;

  auto* train = app.add_subcommand("train-lm", "Train the n-gram model and write it as JSON");
  add_common(train, spec);
  train->add_option("--corpus-out", spec.corpus_out, "Also write the training corpus here");

  auto* gen = app.add_subcommand("generate", "Generate one output per prompt");
  add_common(gen, spec);
  gen->add_option("--model", spec.model_path, "Trained model JSON");
  gen->add_option("--prompts", spec.prompts_path, "Prompt corpus file");
  gen->add_option("--g", spec.g, "Green fraction (watermark off when omitted)");
  gen->add_option("--delta", spec.delta, "Green-list bias");
  gen->add_option("--hash-seed", spec.hash_seed, "Partition seed (default: first hash_seeds entry)");

  auto* score = app.add_subcommand("score", "Watermark score per text or per group");
  add_common(score, spec);
  score->add_option("--input", spec.input_path, "Corpus file of outputs")->required();
  score->add_option("--prompts", spec.prompts_path, "Prompt corpus file");
  score->add_option("--g", spec.g, "Green fraction")->required();
  score->add_option("--hash-seed", spec.hash_seed, "Partition seed");
  score->add_option("--group-size", spec.group_size, "Texts pooled per score");

  auto* detect = app.add_subcommand("detect", "Best F-beta threshold for labeled scores");
  add_common(detect, spec);
  detect->add_option("--input", spec.input_path, "CSV of score,label")->required();
  detect->add_option("--beta", spec.beta, "F-beta weight")->check(CLI::PositiveNumber);

  auto* judge = app.add_subcommand("judge", "Corpus quality of watermarked vs base outputs");
  add_common(judge, spec);
  judge->add_option("--input", spec.input_path, "Watermarked outputs")->required();
  judge->add_option("--base", spec.base_path, "Base outputs")->required();
  judge->add_option("--prompts", spec.prompts_path, "Prompt corpus file");
  judge->add_option("--model", spec.model_path, "Trained model JSON");

  auto* sweep = app.add_subcommand("sweep", "Run the operating-point grid and write the results CSV");
  add_common(sweep, spec);
  sweep->add_option("--model", spec.model_path, "Trained model JSON");
  sweep->add_option("--prompts", spec.prompts_path, "Prompt corpus file");
  sweep->add_option("--checkpoint", spec.checkpoint_path, "Resumable checkpoint CSV");
  sweep->add_option("--manifest", spec.manifest_path, "Write the run manifest JSON here");
  sweep->add_flag("--print-config", spec.print_config, "Print the normalized config and exit");

  auto* fit = app.add_subcommand("fit", "Fit a tanh frontier to sweep or x,y points");
  add_common(fit, spec);
  fit->add_option("--input", spec.input_path, "Sweep CSV or x,y CSV")->required();

  auto* transfer = app.add_subcommand("transfer", "Predict a target model's frontier from a base sweep");
  add_common(transfer, spec);
  transfer->add_option("--base", spec.base_path, "Base model sweep CSV")->required();
  transfer->add_option("--target", spec.target_path, "Target model sweep CSV")->required();

  auto* plot = app.add_subcommand("plot-data", "Emit x,y,series CSV and an optional SVG");
  add_common(plot, spec);
  plot->add_option("--input", spec.input_path, "Sweep CSV")->required();
  plot->add_option("--kind", spec.kind, "frontier or length")->check(CLI::IsMember({"frontier", "length"}));
  plot->add_option("--fit", spec.fit_path, "Fit JSON to overlay");
  plot->add_option("--svg", spec.svg_path, "Also write an SVG rendering");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  spec.subcommand = app.get_subcommands().front()->get_name();
  return dispatch(spec, out, err);
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace waterjudge::cli
