#pragma once
// Batch command-line front end: one subcommand per pipeline stage.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace waterjudge::cli {

enum ExitCode : int { kOk = 0, kDomainError = 1, kConfigError = 2, kTransportError = 3 };

struct CommandSpec {
  std::string subcommand;
  std::optional<std::string> config_path;
  std::optional<std::string> output_path;  // stdout when absent
  std::vector<std::string> overrides;      // key=value
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;  // overrides sampler.rng_seed

  // Stage-specific inputs.
  std::optional<std::string> input_path;
  std::optional<std::string> base_path;
  std::optional<std::string> target_path;
  std::optional<std::string> prompts_path;
  std::optional<std::string> model_path;
  std::optional<std::string> fit_path;
  std::optional<std::string> svg_path;
  std::optional<std::string> manifest_path;
  std::optional<std::string> checkpoint_path;
  std::optional<std::string> corpus_out;
  std::optional<double> g;
  std::optional<double> delta;
  std::optional<std::uint64_t> hash_seed;
  std::size_t group_size = 1;
  double beta = 0.5;
  std::string kind = "frontier";
  bool print_config = false;
};

// Parses argv-style arguments (without the program name) and runs the stage.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(const CommandSpec& spec, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

}  // namespace waterjudge::cli
