#pragma once
// Sweep configuration: JSON schema, defaults, validation and overrides.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "waterjudge/corpus.hpp"
#include "waterjudge/external_judge.hpp"
#include "waterjudge/judge.hpp"
#include "waterjudge/toy_lm.hpp"
#include "waterjudge/wm_core.hpp"

namespace waterjudge {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct OperatingPoint {
  double g = 0.5;
  double delta = 2.0;

  friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

struct CorpusConfig {
  std::optional<std::string> path;  // corpus file; synthetic source when absent
  SyntheticSourceSpec synthetic;
  std::size_t n_tokens = 60000;
  std::uint64_t seed = 11;
};

struct LmConfig {
  std::optional<std::string> path;  // trained model JSON; trained from the corpus when absent
  int order = 3;
  double alpha = 0.01;
};

struct PromptConfig {
  std::optional<std::string> path;  // corpus-format file; cut from the synthetic source when absent
  std::size_t length = 8;
  std::uint64_t seed = 23;
};

struct JudgeConfig {
  enum class Type { likelihood, mock, external };
  Type type = Type::likelihood;
  double scale = 1.0;
  double mock_sharpness = 4.0;
  double mock_position_bias = 0.3;
  std::optional<EndpointDescriptor> endpoint;
};

struct SweepConfig {
  std::vector<OperatingPoint> grid;
  CorpusConfig corpus;
  LmConfig lm;
  PromptConfig prompts;
  std::size_t n_inputs = 200;
  std::size_t group_size = 1;
  std::vector<std::uint64_t> hash_seeds{15485863};
  SamplerConfig sampler;
  JudgeConfig judge;
  PartitionMode mode = PartitionMode::hash_threshold;
  TaskTag task = TaskTag::generic;
  double beta = 0.5;
};

// g in {0.001, 0.01, 0.1, ..., 0.9} x delta in {0.5, 1, 2, 3, 4, 6, 8}.
std::vector<OperatingPoint> default_grid();
std::vector<double> default_g_values();
std::vector<double> default_delta_values();

struct ConfigValidation {
  std::optional<SweepConfig> config;  // set iff errors is empty
  std::vector<std::string> errors;    // "field.path: message"
  std::vector<std::string> warnings;  // unknown keys
  bool ok() const noexcept { return errors.empty(); }
};

ConfigValidation validate_config(const nlohmann::json& doc);
// Empty or whitespace-only files read as {}. Throws ConfigError when unreadable or not JSON.
nlohmann::json load_config_document(const std::string& path);
// Empty or whitespace-only files validate to the defaults.
ConfigValidation validate_config_file(const std::string& path);

nlohmann::json to_json(const SweepConfig& cfg);

// Applies "a.b.c=value" overrides; value is parsed as JSON, falling back to a string.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

// FNV-1a 64 of the normalized config dump, as 16 hex digits.
std::string config_hash(const SweepConfig& cfg);

}  // namespace waterjudge
