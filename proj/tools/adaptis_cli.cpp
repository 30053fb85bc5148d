#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adaptis/errors.hpp"
#include "adaptis/experiment.hpp"
#include "adaptis/model_io.hpp"

namespace {

struct Flags {
  std::string config;
  std::string sweep;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out;
  bool timing = false;
};

void add_common(CLI::App& cmd, Flags& f, bool allow_sweep) {
  cmd.add_option("--config", f.config, "experiment config (JSON)");
  if (allow_sweep) cmd.add_option("--sweep", f.sweep, "text file listing one config path per line");
  cmd.add_option("--seed", f.seed, "override the config seed");
  cmd.add_option("--threads", f.threads, "worker thread cap (results do not depend on it)")->check(CLI::PositiveNumber);
  cmd.add_option("--out", f.out, "output directory");
  cmd.add_flag("--timing", f.timing, "record wall time per iteration in trace CSVs");
}

std::vector<std::filesystem::path> read_sweep(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw adaptis::ValidationError(path.string(), "cannot read sweep file");
  std::vector<std::filesystem::path> configs;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::filesystem::path p = line.substr(first, last - first + 1);
    if (p.is_relative()) p = path.parent_path() / p;
    configs.push_back(p);
  }
  return configs;
}

// Loads one config file; a mode subcommand fills in or checks the mode.
int run_one(const std::filesystem::path& config_path, const std::optional<std::string>& forced_mode,
            const Flags& flags, const std::filesystem::path& out_dir) {
  adaptis::RunOptions options;
  options.seed = flags.seed;
  options.threads = flags.threads;
  options.out_dir = out_dir;
  options.base_dir = config_path.parent_path();
  options.with_timing = flags.timing;
  try {
    auto doc = adaptis::read_json_file(config_path);
    if (forced_mode && doc.is_object()) {
      if (!doc.contains("mode")) doc["mode"] = *forced_mode;
      else if (doc["mode"] != *forced_mode)
        throw adaptis::ValidationError("/mode", "config mode does not match subcommand " + *forced_mode);
    }
    const auto config = adaptis::config_from_json(doc);
    const auto outcome = adaptis::run_experiment(config, options);
    (outcome.exit_code == 0 ? std::cout : std::cerr) << outcome.message << '\n';
    return outcome.exit_code;
  } catch (const adaptis::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

int dispatch(const std::optional<std::string>& mode, const Flags& flags) {
  if (!flags.sweep.empty()) {
    std::vector<std::filesystem::path> configs;
    try {
      configs = read_sweep(flags.sweep);
    } catch (const adaptis::ValidationError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
    const std::filesystem::path root = std::filesystem::path(flags.out.empty() ? "." : flags.out);
    int worst = 0;
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const auto dir = root / (std::to_string(i) + "_" + configs[i].stem().string());
      worst = std::max(worst, run_one(configs[i], mode, flags, dir));
    }
    return worst;
  }
  if (flags.config.empty()) {
    std::cerr << "error: --config or --sweep is required\n";
    return 2;
  }
  return run_one(flags.config, mode, flags, flags.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive importance sampling for absorbing Markov chains"};
  app.set_version_flag("--version", adaptis::build_id());
  app.require_subcommand(1);

  Flags flags;
  std::optional<std::string> mode;
  auto* run = app.add_subcommand("run", "run the mode named in the config");
  add_common(*run, flags, true);
  run->callback([&] { mode.reset(); });

  for (const char* name : {"solve", "simulate", "adapt", "eigen", "counterexample", "constants"}) {
    auto* cmd = app.add_subcommand(name, std::string("run a ") + name + " experiment");
    add_common(*cmd, flags, true);
    cmd->callback([&mode, name] { mode = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return dispatch(mode, flags);
}
