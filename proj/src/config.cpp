#include "waterjudge/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <set>
#include <sstream>

#include "waterjudge/errors.hpp"

namespace waterjudge {

using nlohmann::json;

std::vector<double> default_g_values() { return {0.001, 0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }
std::vector<double> default_delta_values() { return {0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0}; }

std::vector<OperatingPoint> default_grid() {
  std::vector<OperatingPoint> grid;
  for (double g : default_g_values()) {
    for (double d : default_delta_values()) grid.push_back({g, d});
  }
  return grid;
}

namespace {

std::string join_path(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

// Collects every problem instead of stopping at the first one.
class Reader {
 public:
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  void error(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  void unknown_keys(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    std::set<std::string> k(known.begin(), known.end());
    for (const auto& [key, _] : obj.items()) {
      if (!k.count(key)) warnings.push_back(join_path(path, key) + ": unknown key ignored");
    }
  }

  bool object(const json& obj, const std::string& key, const std::string& path, const json*& out) {
    out = nullptr;
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return false;
    if (!it->is_object()) {
      error(join_path(path, key), "expected an object");
      return false;
    }
    out = &*it;
    return true;
  }

  void real(const json& obj, const std::string& key, const std::string& path, double& out,
            const std::function<const char*(double)>& check = {}) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    const auto p = join_path(path, key);
    if (!it->is_number()) return error(p, "expected a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) return error(p, "must be finite");
    if (check) {
      if (const char* msg = check(v)) return error(p, msg);
    }
    out = v;
  }

  template <typename Int>
  void integer(const json& obj, const std::string& key, const std::string& path, Int& out, long long min_value) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    const auto p = join_path(path, key);
    if (!it->is_number_integer()) return error(p, "expected an integer");
    const auto v = it->get<long long>();
    if (v < min_value) return error(p, "must be >= " + std::to_string(min_value));
    out = static_cast<Int>(v);
  }

  bool u64_value(const json& v, const std::string& p, std::uint64_t& out) {
    if (v.is_number_unsigned()) {
      out = v.get<std::uint64_t>();
      return true;
    }
    if (v.is_number_integer() && v.get<long long>() >= 0) {
      out = static_cast<std::uint64_t>(v.get<long long>());
      return true;
    }
    if (v.is_string()) {
      try {
        out = parse_u64_string(v.get<std::string>());
        return true;
      } catch (const DomainError&) {
      }
    }
    error(p, "expected an unsigned 64-bit integer (number or decimal string)");
    return false;
  }

  void u64(const json& obj, const std::string& key, const std::string& path, std::uint64_t& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    std::uint64_t v = 0;
    if (u64_value(*it, join_path(path, key), v)) out = v;
  }

  void opt_string(const json& obj, const std::string& key, const std::string& path, std::optional<std::string>& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    if (!it->is_string()) return error(join_path(path, key), "expected a string or null");
    out = it->get<std::string>();
  }

  bool string(const json& obj, const std::string& key, const std::string& path, std::string& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return false;
    if (!it->is_string()) {
      error(join_path(path, key), "expected a string");
      return false;
    }
    out = it->get<std::string>();
    return true;
  }
};

const char* unit_interval(double v) { return v >= 0.0 && v <= 1.0 ? nullptr : "must lie in [0, 1]"; }
const char* non_negative(double v) { return v >= 0.0 ? nullptr : "must be >= 0"; }
const char* positive(double v) { return v > 0.0 ? nullptr : "must be > 0"; }

void read_synthetic(Reader& r, const json& obj, const std::string& path, SyntheticSourceSpec& s) {
  r.unknown_keys(obj, path,
                 {"vocab_size", "seed", "successor_weights", "period_prob", "end_prob", "max_doc_len"});
  r.integer(obj, "vocab_size", path, s.vocab_size, 8);
  if (s.vocab_size > kMaxGreenListVocab) r.error(join_path(path, "vocab_size"), "must be <= 65536");
  r.u64(obj, "seed", path, s.seed);
  if (const auto it = obj.find("successor_weights"); it != obj.end()) {
    const auto p = join_path(path, "successor_weights");
    if (!it->is_array() || it->empty()) {
      r.error(p, "expected a non-empty array of numbers");
    } else {
      std::vector<double> w;
      bool good = true;
      for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& v = (*it)[i];
        if (!v.is_number() || !(v.get<double>() > 0.0)) {
          r.error(p + "[" + std::to_string(i) + "]", "must be a positive number");
          good = false;
        } else {
          w.push_back(v.get<double>());
        }
      }
      if (good) s.successor_weights = w;
    }
  }
  r.real(obj, "period_prob", path, s.period_prob, [](double v) { return v >= 0.0 && v < 1.0 ? nullptr : "must lie in [0, 1)"; });
  r.real(obj, "end_prob", path, s.end_prob, [](double v) { return v > 0.0 && v <= 1.0 ? nullptr : "must lie in (0, 1]"; });
  r.integer(obj, "max_doc_len", path, s.max_doc_len, 1);
}

}  // namespace

ConfigValidation validate_config(const json& doc) {
  ConfigValidation out;
  Reader r;
  SweepConfig cfg;
  cfg.grid = default_grid();

  if (!doc.is_object() && !doc.is_null()) {
    out.errors.push_back("<root>: expected a JSON object");
    return out;
  }
  const json root = doc.is_null() ? json::object() : doc;
  r.unknown_keys(root, "",
                 {"grid", "corpus", "lm", "prompts", "n_inputs", "group_size", "hash_seeds", "sampler", "judge", "mode",
                  "task", "beta"});

  if (const auto it = root.find("grid"); it != root.end()) {
    if (!it->is_array() || it->empty()) {
      r.error("grid", "expected a non-empty array of {g, delta}");
    } else {
      std::vector<OperatingPoint> grid;
      for (std::size_t i = 0; i < it->size(); ++i) {
        const auto p = "grid[" + std::to_string(i) + "]";
        const auto& e = (*it)[i];
        if (!e.is_object()) {
          r.error(p, "expected an object {g, delta}");
          continue;
        }
        r.unknown_keys(e, p, {"g", "delta"});
        OperatingPoint op;
        if (!e.contains("g")) r.error(p + ".g", "required");
        if (!e.contains("delta")) r.error(p + ".delta", "required");
        r.real(e, "g", p, op.g, unit_interval);
        r.real(e, "delta", p, op.delta, non_negative);
        grid.push_back(op);
      }
      cfg.grid = grid;
    }
  }

  const json* sub = nullptr;
  if (r.object(root, "corpus", "", sub)) {
    r.unknown_keys(*sub, "corpus", {"path", "synthetic", "n_tokens", "seed"});
    r.opt_string(*sub, "path", "corpus", cfg.corpus.path);
    const json* syn = nullptr;
    if (r.object(*sub, "synthetic", "corpus", syn)) read_synthetic(r, *syn, "corpus.synthetic", cfg.corpus.synthetic);
    r.integer(*sub, "n_tokens", "corpus", cfg.corpus.n_tokens, 1);
    r.u64(*sub, "seed", "corpus", cfg.corpus.seed);
  }
  if (r.object(root, "lm", "", sub)) {
    r.unknown_keys(*sub, "lm", {"path", "order", "alpha"});
    r.opt_string(*sub, "path", "lm", cfg.lm.path);
    r.integer(*sub, "order", "lm", cfg.lm.order, 1);
    if (cfg.lm.order > NGramLM::kMaxOrder) r.error("lm.order", "must be <= 5");
    r.real(*sub, "alpha", "lm", cfg.lm.alpha, positive);
  }
  if (r.object(root, "prompts", "", sub)) {
    r.unknown_keys(*sub, "prompts", {"path", "length", "seed"});
    r.opt_string(*sub, "path", "prompts", cfg.prompts.path);
    r.integer(*sub, "length", "prompts", cfg.prompts.length, 1);
    r.u64(*sub, "seed", "prompts", cfg.prompts.seed);
  }
  r.integer(root, "n_inputs", "", cfg.n_inputs, 1);
  r.integer(root, "group_size", "", cfg.group_size, 1);
  if (const auto it = root.find("hash_seeds"); it != root.end()) {
    if (!it->is_array() || it->empty()) {
      r.error("hash_seeds", "expected a non-empty array");
    } else {
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = 0; i < it->size(); ++i) {
        std::uint64_t v = 0;
        if (r.u64_value((*it)[i], "hash_seeds[" + std::to_string(i) + "]", v)) seeds.push_back(v);
      }
      cfg.hash_seeds = seeds;
    }
  }
  if (r.object(root, "sampler", "", sub)) {
    r.unknown_keys(*sub, "sampler", {"temperature", "rng_seed", "max_tokens", "eos_token"});
    r.real(*sub, "temperature", "sampler", cfg.sampler.temperature, positive);
    r.u64(*sub, "rng_seed", "sampler", cfg.sampler.rng_seed);
    r.integer(*sub, "max_tokens", "sampler", cfg.sampler.max_tokens, 1);
    r.integer(*sub, "eos_token", "sampler", cfg.sampler.eos_token, 0);
  }
  if (r.object(root, "judge", "", sub)) {
    r.unknown_keys(*sub, "judge", {"type", "scale", "mock_sharpness", "mock_position_bias", "endpoint"});
    std::string type;
    if (r.string(*sub, "type", "judge", type)) {
      if (type == "likelihood") {
        cfg.judge.type = JudgeConfig::Type::likelihood;
      } else if (type == "mock") {
        cfg.judge.type = JudgeConfig::Type::mock;
      } else if (type == "external") {
        cfg.judge.type = JudgeConfig::Type::external;
      } else {
        r.error("judge.type", "must be one of likelihood, mock, external");
      }
    }
    r.real(*sub, "scale", "judge", cfg.judge.scale, positive);
    r.real(*sub, "mock_sharpness", "judge", cfg.judge.mock_sharpness);
    r.real(*sub, "mock_position_bias", "judge", cfg.judge.mock_position_bias);
    const json* ep = nullptr;
    if (r.object(*sub, "endpoint", "judge", ep)) {
      try {
        cfg.judge.endpoint = EndpointDescriptor::from_json(*ep);
      } catch (const ConfigError& e) {
        r.error("judge.endpoint", e.what());
      }
    }
    if (cfg.judge.type == JudgeConfig::Type::external && !cfg.judge.endpoint) {
      r.error("judge.endpoint", "required when judge.type is external");
    }
  }
  if (std::string mode; r.string(root, "mode", "", mode)) {
    try {
      cfg.mode = parse_partition_mode(mode);
    } catch (const DomainError&) {
      r.error("mode", "must be hash_threshold or exact_partition");
    }
  }
  if (std::string task; r.string(root, "task", "", task)) {
    try {
      cfg.task = parse_task_tag(task);
    } catch (const DomainError&) {
      r.error("task", "must be summary, translation or generic");
    }
  }
  r.real(root, "beta", "", cfg.beta, positive);

  const auto vocab = cfg.corpus.synthetic.vocab_size;
  if (!cfg.corpus.path && !cfg.lm.path && cfg.sampler.eos_token >= vocab) {
    r.error("sampler.eos_token", "must be < corpus.synthetic.vocab_size");
  }

  out.errors = std::move(r.errors);
  out.warnings = std::move(r.warnings);
  if (out.errors.empty()) out.config = std::move(cfg);
  return out;
}

json load_config_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("<file>: not valid JSON: " + path);
  return doc;
}

ConfigValidation validate_config_file(const std::string& path) {
  try {
    return validate_config(load_config_document(path));
  } catch (const ConfigError& e) {
    ConfigValidation v;
    v.errors.emplace_back(e.what());
    return v;
  }
}

json to_json(const SweepConfig& cfg) {
  json grid = json::array();
  for (const auto& p : cfg.grid) grid.push_back({{"g", p.g}, {"delta", p.delta}});
  json seeds = json::array();
  for (auto s : cfg.hash_seeds) seeds.push_back(std::to_string(s));
  const auto& syn = cfg.corpus.synthetic;
  json judge{{"type", cfg.judge.type == JudgeConfig::Type::likelihood ? "likelihood"
                      : cfg.judge.type == JudgeConfig::Type::mock     ? "mock"
                                                                      : "external"},
             {"scale", cfg.judge.scale},
             {"mock_sharpness", cfg.judge.mock_sharpness},
             {"mock_position_bias", cfg.judge.mock_position_bias}};
  if (cfg.judge.endpoint) judge["endpoint"] = cfg.judge.endpoint->to_json();
  auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  return json{
      {"grid", grid},
      {"corpus",
       {{"path", opt(cfg.corpus.path)},
        {"n_tokens", cfg.corpus.n_tokens},
        {"seed", std::to_string(cfg.corpus.seed)},
        {"synthetic",
         {{"vocab_size", syn.vocab_size},
          {"seed", std::to_string(syn.seed)},
          {"successor_weights", syn.successor_weights},
          {"period_prob", syn.period_prob},
          {"end_prob", syn.end_prob},
          {"max_doc_len", syn.max_doc_len}}}}},
      {"lm", {{"path", opt(cfg.lm.path)}, {"order", cfg.lm.order}, {"alpha", cfg.lm.alpha}}},
      {"prompts",
       {{"path", opt(cfg.prompts.path)}, {"length", cfg.prompts.length}, {"seed", std::to_string(cfg.prompts.seed)}}},
      {"n_inputs", cfg.n_inputs},
      {"group_size", cfg.group_size},
      {"hash_seeds", seeds},
      {"sampler",
       {{"temperature", cfg.sampler.temperature},
        {"rng_seed", std::to_string(cfg.sampler.rng_seed)},
        {"max_tokens", cfg.sampler.max_tokens},
        {"eos_token", cfg.sampler.eos_token}}},
      {"judge", judge},
      {"mode", std::string(to_string(cfg.mode))},
      {"task", std::string(to_string(cfg.task))},
      {"beta", cfg.beta},
  };
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  if (doc.is_null()) doc = json::object();
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: '" + ov + "'");
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("override has an empty path segment: '" + ov + "'");
      if (!node->is_object()) throw ConfigError("override path crosses a non-object: '" + ov + "'");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      if (node->is_null()) *node = json::object();
      start = dot + 1;
    }
  }
}

std::string config_hash(const SweepConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace waterjudge
