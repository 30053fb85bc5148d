#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adaptis/adaptive_loop.hpp"

namespace adaptis {

enum class Mode { solve, simulate, adapt, eigen, counterexample, constants };

std::string to_string(Mode mode);
/// Throws ValidationError for unknown names.
Mode mode_from_string(const std::string& name);

struct BasisSpec {
  std::vector<State> design;
  std::vector<double> offset;               // one per transient state
  std::vector<std::vector<double>> columns; // p columns, each one per transient state

  bool operator==(const BasisSpec&) const = default;
};

/// One experiment. Fields beyond mode/model_path/seed are optional and
/// required or ignored depending on the mode (see validate_config).
struct ExperimentConfig {
  Mode mode = Mode::solve;
  std::string model_path;
  std::uint64_t seed = 0;
  std::optional<std::size_t> R;
  std::optional<std::size_t> n_iters;
  std::optional<std::size_t> max_steps;
  std::optional<ClampBounds> clamp;
  std::optional<BasisSpec> basis;
  std::optional<std::vector<double>> init;    // adapt: mu^(0); eigen: nu^(0) over 1..d
  std::optional<std::vector<double>> nu;      // simulate: tilting function (default: exact value)
  std::optional<std::vector<State>> start_states;  // simulate: default every transient state
  std::optional<double> nu_min;               // constants
  std::optional<double> nu_max;
  std::optional<double> alpha_max;            // eigen
  std::optional<std::string> chain;           // counterexample: "divergent" | "summable"
  std::optional<std::size_t> steps;           // counterexample
  std::optional<std::size_t> n_runs;          // counterexample
  std::size_t burn_in = 0;                    // adapt: rate-fit window start
  std::string output_path;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses a config document; type errors throw ValidationError with the
/// offending JSON pointer. Mode-specific requirements are checked by
/// validate_config().
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Throws ValidationError naming the first missing or invalid field.
void validate_config(const ExperimentConfig& config);

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  unsigned threads = 0;               // 0: hardware concurrency
  std::filesystem::path out_dir;      // empty: config output_path, else "."
  std::filesystem::path base_dir;     // relative model paths resolve against this
  bool with_timing = false;           // fill wall_ms in trace CSVs
};

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 2 validation failure, 3 numerical failure
  std::string message;
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;
};

/// Runs one experiment and writes its CSV trace and summary.json into the
/// output directory. Never throws for input or numerical problems; those map
/// to exit codes 2 and 3.
RunOutcome run_experiment(ExperimentConfig config, const RunOptions& options);

/// Build identifier (git describe at configure time).
std::string build_id();

}  // namespace adaptis
