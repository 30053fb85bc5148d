#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "adaptis/errors.hpp"
#include "adaptis/experiment.hpp"
#include "adaptis/model_io.hpp"

using namespace adaptis;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path data_dir = ADAPTIS_DATA_DIR;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("adaptis_test_experiment") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

RunOutcome run_file(const fs::path& config_path, const fs::path& out, unsigned threads = 0) {
  RunOptions options;
  options.out_dir = out;
  options.base_dir = config_path.parent_path();
  options.threads = threads;
  return run_experiment(config_from_json(read_json_file(config_path)), options);
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ADAPTIS_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("solve on the two-state model writes mu = (2, 2)") {
  const auto out = scratch("solve");
  const auto outcome = run_file(data_dir / "configs/solve_twostate.json", out);
  REQUIRE(outcome.exit_code == 0);
  const auto summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary["mode"] == "solve");
  CHECK(summary["metrics"]["mu"][0].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(summary["metrics"]["mu"][1].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(summary.contains("build_id"));
  CHECK(summary.contains("censored_total"));
  CHECK(slurp(out / "values.csv").rfind("state,mu\n", 0) == 0);
}

TEST_CASE("every shipped config runs") {
  for (const char* name : {"constants_twostate", "simulate_twostate", "adapt_twostate", "eigen_2x2",
                           "counterexample_summable"}) {
    CAPTURE(name);
    const auto out = scratch(name);
    const auto outcome = run_file(data_dir / "configs" / (std::string(name) + ".json"), out);
    CHECK(outcome.exit_code == 0);
    CHECK(fs::exists(out / "summary.json"));
    CHECK(outcome.files.size() >= 2);
  }
}

TEST_CASE("missing required fields exit with code 2 and name the field") {
  ExperimentConfig config;
  config.mode = Mode::adapt;
  config.model_path = (data_dir / "twostate.json").string();
  config.n_iters = 3;
  RunOptions options;
  options.out_dir = scratch("missing_R");
  const auto outcome = run_experiment(config, options);
  CHECK(outcome.exit_code == 2);
  CHECK(outcome.message.find("R") != std::string::npos);

  config.mode = Mode::counterexample;
  config.chain = "sideways";
  CHECK_THROWS_AS(validate_config(config), ValidationError);
}

TEST_CASE("unreadable model path is reported with exit code 2") {
  ExperimentConfig config;
  config.model_path = "/nonexistent/model.json";
  RunOptions options;
  options.out_dir = scratch("unreadable");
  const auto outcome = run_experiment(config, options);
  CHECK(outcome.exit_code == 2);
  CHECK(outcome.message.find("/nonexistent/model.json") != std::string::npos);
}

TEST_CASE("a divergent model exits with code 3") {
  const auto dir = scratch("divergent");
  write_text(dir / "model.json", R"({
    "n_states": 3, "absorbing": [0],
    "P":    [[1, 0, 0], [0, 0, 1], [0.1, 0.9, 0]],
    "s":    [[0, 0, 0], [1, 1, 1], [1, 1, 1]],
    "beta": [[1, 1, 1], [2, 2, 2], [2, 2, 2]]
  })");
  write_text(dir / "config.json", R"({"mode": "solve", "model_path": "model.json"})");
  const auto outcome = run_file(dir / "config.json", dir / "out");
  CHECK(outcome.exit_code == 3);
  CHECK(outcome.message.find("spectral radius") != std::string::npos);
}

TEST_CASE("configs round-trip through JSON") {
  ExperimentConfig config;
  config.mode = Mode::adapt;
  config.model_path = "m.json";
  config.seed = 12;
  config.R = 100;
  config.n_iters = 4;
  config.max_steps = 77;
  config.clamp = ClampBounds{0.5, 9.0};
  config.basis = BasisSpec{{1, 2}, {0.1, 0.2}, {{1.0, 2.0}}};
  config.init = std::vector<double>{1.0, 2.0};
  config.burn_in = 1;
  config.output_path = "out";
  CHECK(config_from_json(config_to_json(config)) == config);

  ExperimentConfig cx;
  cx.mode = Mode::counterexample;
  cx.chain = "summable";
  cx.steps = 10;
  cx.n_runs = 3;
  CHECK(config_from_json(config_to_json(cx)) == cx);
}

TEST_CASE("config parse errors") {
  CHECK_THROWS_AS(config_from_json(json{{"mode", "solve"}, {"model_path", "m"}, {"bogus", 1}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"mode", "integrate"}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"mode", "adapt"}, {"R", "many"}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json::array()), ValidationError);
  ExperimentConfig bad;
  bad.model_path = "m";
  bad.mode = Mode::simulate;
  bad.R = 0;
  CHECK_THROWS_AS(validate_config(bad), ValidationError);
  bad.R = 5;
  bad.clamp = ClampBounds{2.0, 1.0};
  CHECK_THROWS_AS(validate_config(bad), ValidationError);
}

TEST_CASE("outputs are byte-identical across repeats and thread counts") {
  const auto cfg = data_dir / "configs/adapt_twostate.json";
  const auto a = scratch("repeat_a");
  const auto b = scratch("repeat_b");
  REQUIRE(run_file(cfg, a, 1).exit_code == 0);
  REQUIRE(run_file(cfg, b, 4).exit_code == 0);
  CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));
  const auto sa = json::parse(slurp(a / "summary.json"));
  const auto sb = json::parse(slurp(b / "summary.json"));
  CHECK(sa["metrics"] == sb["metrics"]);
}

TEST_CASE("command line: exit codes, thread independence, sweeps") {
  const auto dir = scratch("cli");
  const auto cfg = (data_dir / "configs/simulate_twostate.json").string();
  CHECK(cli("simulate --config \"" + cfg + "\" --threads 1 --out \"" + (dir / "t1").string() + "\"") == 0);
  CHECK(cli("run --config \"" + cfg + "\" --threads 4 --out \"" + (dir / "t4").string() + "\"") == 0);
  CHECK(slurp(dir / "t1/replications.csv") == slurp(dir / "t4/replications.csv"));
  CHECK(!slurp(dir / "t1/replications.csv").empty());

  CHECK(cli("run --config \"" + cfg + "\" --seed 8 --out \"" + (dir / "s8").string() + "\"") == 0);
  CHECK(slurp(dir / "s8/replications.csv") != slurp(dir / "t1/replications.csv"));
  CHECK(json::parse(slurp(dir / "s8/summary.json"))["config"]["seed"] == 8);

  CHECK(cli("adapt --config \"" + cfg + "\" --out \"" + (dir / "mismatch").string() + "\"") == 2);
  CHECK(cli("solve") == 2);
  CHECK(cli("solve --config \"" + cfg + "\" --threads 0") == 2);
  CHECK(cli("--version") == 0);

  write_text(dir / "list.sweep", "# two runs\n" + (data_dir / "configs/solve_twostate.json").string() +
                                     "\n\n" + (data_dir / "configs/constants_twostate.json").string() + "\n");
  CHECK(cli("run --sweep \"" + (dir / "list.sweep").string() + "\" --out \"" + (dir / "sweep").string() + "\"") == 0);
  CHECK(fs::exists(dir / "sweep/0_solve_twostate/summary.json"));
  CHECK(fs::exists(dir / "sweep/1_constants_twostate/summary.json"));

  write_text(dir / "bad.sweep", (data_dir / "configs/solve_twostate.json").string() + "\nmissing.json\n");
  CHECK(cli("run --sweep \"" + (dir / "bad.sweep").string() + "\" --out \"" + (dir / "bad").string() + "\"") == 2);
}
