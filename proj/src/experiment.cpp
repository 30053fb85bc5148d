#include "adaptis/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "adaptis/counterexample.hpp"
#include "adaptis/eigenvalue.hpp"
#include "adaptis/errors.hpp"
#include "adaptis/exact_solver.hpp"
#include "adaptis/importance_sampling.hpp"
#include "adaptis/model_io.hpp"
#include "adaptis/parallel.hpp"

#ifndef ADAPTIS_BUILD_ID
#define ADAPTIS_BUILD_ID "unknown"
#endif

namespace adaptis {

using nlohmann::json;

namespace {

constexpr const char* kModeNames[] = {"solve", "simulate", "adapt", "eigen", "counterexample", "constants"};

std::string pointer(const std::string& key) { return "/" + key; }

std::uint64_t get_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i >= 0) return static_cast<std::uint64_t>(i);
  }
  throw ValidationError(path, "expected a nonnegative integer");
}

double get_double(const json& v, const std::string& path) {
  if (!v.is_number()) throw ValidationError(path, "expected a number");
  return v.get<double>();
}

std::vector<double> get_doubles(const json& v, const std::string& path) {
  if (!v.is_array()) throw ValidationError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_double(v[i], path + "/" + std::to_string(i)));
  return out;
}

std::vector<State> get_states(const json& v, const std::string& path) {
  if (!v.is_array()) throw ValidationError(path, "expected an array of state ids");
  std::vector<State> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_u64(v[i], path + "/" + std::to_string(i)));
  return out;
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ValidationError(path, "expected a string");
  return v.get<std::string>();
}

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }
json to_json(const ValueFunction& f) { return to_json(f.values); }

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

class Outputs {
 public:
  explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ValidationError(dir_.string(), "cannot create output directory: " + ec.message());
  }

  std::ofstream open(const std::string& name) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError(path.string(), "cannot open for writing");
    files_.push_back(path);
    return out;
  }

  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
};

struct ModeResult {
  json metrics = json::object();
  std::size_t censored_total = 0;
};

ValueFunction to_value_function(const std::vector<double>& v) {
  return ValueFunction{Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))};
}

void require_length(const std::vector<double>& v, std::size_t n, const std::string& path) {
  if (v.size() != n) throw ValidationError(path, fmt::format("expected {} entries, got {}", n, v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(v[i] > 0.0) || !std::isfinite(v[i]))
      throw ValidationError(path + "/" + std::to_string(i), "must be finite and strictly positive");
}

ModeResult run_solve(const ExperimentConfig& cfg, const MarkovRewardModel& model, Outputs& out) {
  const auto sol = solve_value(model);
  auto csv = out.open("values.csv");
  csv << "state,mu\n";
  for (std::size_t k = 0; k < model.n_transient(); ++k)
    csv << fmt::format("{},{:.17g}\n", model.transient()[k], sol.value[k]);
  ModeResult r;
  r.metrics["mu"] = to_json(sol.value);
  r.metrics["transient_states"] = model.transient();
  r.metrics["spectral_radius"] = sol.spectral_radius;
  json violations = json::array();
  for (const auto& v : sol.convention_violations) violations.push_back({{"path", v.path}, {"message", v.message}});
  r.metrics["convention_violations"] = std::move(violations);
  (void)cfg;
  return r;
}

json constants_to_json(const StructuralConstants& c) {
  return json{{"reward_sup", c.reward_sup},   {"discount_sup", c.discount_sup},
              {"discount_inf", c.discount_inf}, {"mu_min", c.mu_min},
              {"mu_max", c.mu_max},           {"horizon", c.horizon},
              {"gamma", c.gamma},             {"nu_min", c.nu_min},
              {"nu_max", c.nu_max},           {"kappa", c.kappa},
              {"growth", c.growth},           {"geometric_rate", c.geometric_rate}};
}

StructuralConstants constants_for(const ExperimentConfig& cfg, const MarkovRewardModel& model,
                                  const ValueFunction& mu) {
  const double lo = cfg.nu_min.value_or(0.5 * mu.min());
  const double hi = cfg.nu_max.value_or(2.0 * mu.max());
  if (lo > mu.min()) throw ValidationError("/nu_min", "must not exceed the smallest exact value");
  if (hi < mu.max()) throw ValidationError("/nu_max", "must not be below the largest exact value");
  return compute_constants(model, mu, lo, hi, default_horizon_cap(model));
}

ModeResult run_constants(const ExperimentConfig& cfg, const MarkovRewardModel& model, Outputs& out) {
  const auto sol = solve_value(model);
  const auto c = constants_for(cfg, model, sol.value);
  auto csv = out.open("survival_bounds.csv");
  csv << "k,bound,block_bound\n";
  for (std::size_t k = 0; k <= 5 * c.horizon + 50; ++k)
    csv << fmt::format("{},{:.17g},{:.17g}\n", k, survival_bound(c, k), block_survival_bound(c, k));
  ModeResult r;
  r.metrics = constants_to_json(c);
  r.metrics["mu"] = to_json(sol.value);
  return r;
}

ModeResult run_simulate(const ExperimentConfig& cfg, const MarkovRewardModel& model, Outputs& out) {
  const auto sol = solve_value(model);
  ValueFunction nu = sol.value;
  if (cfg.nu) {
    require_length(*cfg.nu, model.n_transient(), "/nu");
    nu = to_value_function(*cfg.nu);
  }
  const auto tilted = build_tilted(model, nu);
  std::size_t max_steps = cfg.max_steps.value_or(0);
  if (max_steps == 0) {
    const double lo = std::min(0.5 * sol.value.min(), nu.min());
    const double hi = std::max(2.0 * sol.value.max(), nu.max());
    max_steps = std::min<std::size_t>(default_max_steps(compute_constants(model, sol.value, lo, hi,
                                                                          default_horizon_cap(model))),
                                      10'000'000);
  }
  const auto starts = cfg.start_states.value_or(model.transient());
  for (std::size_t i = 0; i < starts.size(); ++i)
    if (!model.transient_index(starts[i]))
      throw ValidationError("/start_states/" + std::to_string(i), "not a transient state");

  const auto moments = exact_moments(tilted);
  auto csv = out.open("replications.csv");
  ModeResult r;
  json per_state = json::array();
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const State x0 = starts[i];
    const auto est = estimate_value(tilted, x0, *cfg.R, cfg.seed, max_steps);
    write_replications_csv(csv, x0, est, i == 0);
    const auto k = *model.transient_index(x0);
    r.censored_total += est.censored_count;
    per_state.push_back({{"state", x0},
                         {"mean", est.mean},
                         {"sample_variance", est.sample_variance},
                         {"censored", est.censored_count},
                         {"exact_mean", moments.mean[k]},
                         {"exact_variance", number_or_null(moments.variance()[k])},
                         {"abs_error", std::abs(est.mean - sol.value[k])}});
  }
  r.metrics["per_state"] = std::move(per_state);
  r.metrics["max_steps"] = max_steps;
  r.metrics["finite_variance"] = moments.finite_variance;
  return r;
}

BasisModel basis_for(const ExperimentConfig& cfg, const MarkovRewardModel& model) {
  if (!cfg.basis) return BasisModel::tabular(model);
  const auto& b = *cfg.basis;
  const std::size_t n = model.n_transient();
  if (b.offset.size() != n) throw ValidationError("/basis/offset", fmt::format("expected {} entries", n));
  if (b.columns.empty()) throw ValidationError("/basis/columns", "needs at least one column");
  Matrix basis(n, b.columns.size());
  for (std::size_t j = 0; j < b.columns.size(); ++j) {
    if (b.columns[j].size() != n)
      throw ValidationError("/basis/columns/" + std::to_string(j), fmt::format("expected {} entries", n));
    for (std::size_t k = 0; k < n; ++k) basis(k, j) = b.columns[j][k];
  }
  for (std::size_t i = 0; i < b.design.size(); ++i)
    if (!model.transient_index(b.design[i]))
      throw ValidationError("/basis/design/" + std::to_string(i), "not a transient state");
  try {
    return BasisModel::regression(model, b.design, Eigen::Map<const Vector>(b.offset.data(), n), basis);
  } catch (const DomainError& e) {
    throw ValidationError("/basis", e.what());
  }
}

ModeResult run_adapt(const ExperimentConfig& cfg, const MarkovRewardModel& model, Outputs& out,
                     bool with_timing) {
  const auto basis = basis_for(cfg, model);
  ValueFunction init{Vector::Ones(static_cast<Eigen::Index>(model.n_transient()))};
  if (cfg.init) {
    require_length(*cfg.init, model.n_transient(), "/init");
    init = to_value_function(*cfg.init);
  }
  AdaptiveConfig ac;
  ac.replications = *cfg.R;
  ac.iterations = *cfg.n_iters;
  ac.seed = cfg.seed;
  ac.max_steps = cfg.max_steps.value_or(0);
  ac.clamp = cfg.clamp;
  auto trace = run_adaptive(model, basis, init, ac);

  std::optional<double> theta;
  try {
    theta = estimate_rate(trace, cfg.burn_in);
  } catch (const NumericalError&) {
  }
  auto csv = out.open("trace.csv");
  write_trace_csv(csv, trace, with_timing);

  ModeResult r;
  r.censored_total = trace.censored_total();
  r.metrics["final_sup_error"] = trace.sup_errors.back();
  r.metrics["theta_hat"] = theta ? json(*theta) : json(nullptr);
  r.metrics["iterations"] = trace.stats.size();
  r.metrics["final_iterate"] = to_json(trace.iterates.back());
  r.metrics["sup_errors"] = trace.sup_errors;
  r.metrics["clamp"] = {trace.clamp.floor, trace.clamp.ceiling};
  r.metrics["max_steps"] = trace.max_steps;
  r.metrics["tabular"] = trace.tabular;
  r.metrics["flagged_iterations"] =
      std::count_if(trace.stats.begin(), trace.stats.end(), [](const IterationStats& s) { return s.flagged; });
  return r;
}

ModeResult run_eigen(const ExperimentConfig& cfg, const EigenModel& model, Outputs& out) {
  Vector init = Vector::Ones(static_cast<Eigen::Index>(model.d()));
  if (cfg.init) {
    require_length(*cfg.init, model.d(), "/init");
    init = Eigen::Map<const Vector>(cfg.init->data(), static_cast<Eigen::Index>(cfg.init->size()));
  }
  EigenConfig ec;
  ec.replications = *cfg.R;
  ec.iterations = *cfg.n_iters;
  ec.seed = cfg.seed;
  ec.alpha_max = cfg.alpha_max;
  ec.clamp = cfg.clamp;
  if (cfg.max_steps) ec.max_steps = *cfg.max_steps;
  const auto trace = run_eigen_adaptive(model, init, ec);

  auto csv = out.open("eigen_trace.csv");
  write_eigen_trace_csv(csv, trace);

  ModeResult r;
  for (const auto& rec : trace.records) r.censored_total += rec.censored;
  const auto& last = trace.records.back();
  r.metrics["eigenvalue"] = trace.oracle.eigenvalue;
  r.metrics["alpha_star"] = trace.oracle.exponent;
  r.metrics["oracle_residual"] = trace.oracle.residual;
  r.metrics["eigenvector"] = to_json(trace.oracle.vector);
  r.metrics["alpha_hat"] = last.alpha_hat;
  r.metrics["alpha_err"] = last.alpha_err;
  r.metrics["nu_sup_err"] = last.nu_sup_err;
  r.metrics["alpha_max"] = trace.alpha_max;
  r.metrics["final_nu"] = to_json(trace.iterates.back());
  return r;
}

HalvingChainSpec chain_for(const std::string& name) {
  if (name == "divergent") return HalvingChainSpec::divergent();
  if (name == "summable") return HalvingChainSpec::summable();
  throw ValidationError("/chain", "expected \"divergent\" or \"summable\", got \"" + name + "\"");
}

ModeResult run_counterexample(const ExperimentConfig& cfg, Outputs& out) {
  const auto spec = chain_for(*cfg.chain);
  const auto summary = classify_experiment(spec, cfg.steps.value_or(100'000), cfg.n_runs.value_or(100), cfg.seed);
  auto csv = out.open("halving_runs.csv");
  write_halving_csv(csv, summary);
  ModeResult r;
  r.metrics = {{"chain", summary.label},
               {"steps", summary.steps},
               {"runs", summary.runs},
               {"mean_visits", summary.mean_visits},
               {"frac_at_least_5_visits", summary.frac_at_least_5},
               {"frac_at_most_3_visits", summary.frac_at_most_3},
               {"median_final_level", summary.median_final_level},
               {"frac_final_level_at_least_half", summary.frac_final_level_half},
               {"horizon_note", "visit counts over a finite horizon stand in for recurrence and transience"}};
  return r;
}

}  // namespace

std::string to_string(Mode mode) { return kModeNames[static_cast<int>(mode)]; }

Mode mode_from_string(const std::string& name) {
  for (int i = 0; i < 6; ++i)
    if (name == kModeNames[i]) return static_cast<Mode>(i);
  throw ValidationError("/mode", "unknown mode \"" + name + "\"");
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("", "config must be a JSON object");
  static const std::set<std::string> known = {
      "mode",  "model_path", "seed",   "R",      "n_iters",   "max_steps", "clamp",   "basis",
      "init",  "nu",         "start_states", "nu_min", "nu_max", "alpha_max", "chain", "steps",
      "n_runs", "burn_in",   "output_path"};
  for (const auto& [key, _] : doc.items())
    if (!known.contains(key)) throw ValidationError(pointer(key), "unknown field");

  ExperimentConfig c;
  if (!doc.contains("mode")) throw ValidationError("/mode", "missing required field");
  c.mode = mode_from_string(get_string(doc["mode"], "/mode"));
  auto has = [&](const char* k) { return doc.contains(k) && !doc[k].is_null(); };
  if (has("model_path")) c.model_path = get_string(doc["model_path"], "/model_path");
  if (has("seed")) c.seed = get_u64(doc["seed"], "/seed");
  if (has("R")) c.R = get_u64(doc["R"], "/R");
  if (has("n_iters")) c.n_iters = get_u64(doc["n_iters"], "/n_iters");
  if (has("max_steps")) c.max_steps = get_u64(doc["max_steps"], "/max_steps");
  if (has("clamp")) {
    const auto& cl = doc["clamp"];
    if (!cl.is_object() || !cl.contains("floor") || !cl.contains("ceiling"))
      throw ValidationError("/clamp", "expected {\"floor\": x, \"ceiling\": y}");
    c.clamp = ClampBounds{get_double(cl["floor"], "/clamp/floor"), get_double(cl["ceiling"], "/clamp/ceiling")};
  }
  if (has("basis")) {
    const auto& b = doc["basis"];
    if (!b.is_object()) throw ValidationError("/basis", "expected an object");
    for (const char* k : {"design", "offset", "columns"})
      if (!b.contains(k)) throw ValidationError(std::string("/basis/") + k, "missing required field");
    BasisSpec spec;
    spec.design = get_states(b["design"], "/basis/design");
    spec.offset = get_doubles(b["offset"], "/basis/offset");
    if (!b["columns"].is_array()) throw ValidationError("/basis/columns", "expected an array of columns");
    for (std::size_t j = 0; j < b["columns"].size(); ++j)
      spec.columns.push_back(get_doubles(b["columns"][j], "/basis/columns/" + std::to_string(j)));
    c.basis = std::move(spec);
  }
  if (has("init")) c.init = get_doubles(doc["init"], "/init");
  if (has("nu")) c.nu = get_doubles(doc["nu"], "/nu");
  if (has("start_states")) c.start_states = get_states(doc["start_states"], "/start_states");
  if (has("nu_min")) c.nu_min = get_double(doc["nu_min"], "/nu_min");
  if (has("nu_max")) c.nu_max = get_double(doc["nu_max"], "/nu_max");
  if (has("alpha_max")) c.alpha_max = get_double(doc["alpha_max"], "/alpha_max");
  if (has("chain")) c.chain = get_string(doc["chain"], "/chain");
  if (has("steps")) c.steps = get_u64(doc["steps"], "/steps");
  if (has("n_runs")) c.n_runs = get_u64(doc["n_runs"], "/n_runs");
  if (has("burn_in")) c.burn_in = get_u64(doc["burn_in"], "/burn_in");
  if (has("output_path")) c.output_path = get_string(doc["output_path"], "/output_path");
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["mode"] = to_string(c.mode);
  if (!c.model_path.empty()) doc["model_path"] = c.model_path;
  doc["seed"] = c.seed;
  if (c.R) doc["R"] = *c.R;
  if (c.n_iters) doc["n_iters"] = *c.n_iters;
  if (c.max_steps) doc["max_steps"] = *c.max_steps;
  if (c.clamp) doc["clamp"] = {{"floor", c.clamp->floor}, {"ceiling", c.clamp->ceiling}};
  if (c.basis) doc["basis"] = {{"design", c.basis->design}, {"offset", c.basis->offset}, {"columns", c.basis->columns}};
  if (c.init) doc["init"] = *c.init;
  if (c.nu) doc["nu"] = *c.nu;
  if (c.start_states) doc["start_states"] = *c.start_states;
  if (c.nu_min) doc["nu_min"] = *c.nu_min;
  if (c.nu_max) doc["nu_max"] = *c.nu_max;
  if (c.alpha_max) doc["alpha_max"] = *c.alpha_max;
  if (c.chain) doc["chain"] = *c.chain;
  if (c.steps) doc["steps"] = *c.steps;
  if (c.n_runs) doc["n_runs"] = *c.n_runs;
  if (c.burn_in != 0) doc["burn_in"] = c.burn_in;
  if (!c.output_path.empty()) doc["output_path"] = c.output_path;
  return doc;
}

void validate_config(const ExperimentConfig& c) {
  auto require = [](bool present, const char* field) {
    if (!present) throw ValidationError(pointer(field), "missing required field");
  };
  auto at_least_one = [](const std::optional<std::size_t>& v, const char* field) {
    if (v && *v < 1) throw ValidationError(pointer(field), "must be at least 1");
  };
  auto positive = [](const std::optional<double>& v, const char* field) {
    if (v && !(*v > 0.0 && std::isfinite(*v)))
      throw ValidationError(pointer(field), "must be finite and strictly positive");
  };

  if (c.mode != Mode::counterexample) require(!c.model_path.empty(), "model_path");
  switch (c.mode) {
    case Mode::simulate:
      require(c.R.has_value(), "R");
      break;
    case Mode::adapt:
    case Mode::eigen:
      require(c.R.has_value(), "R");
      require(c.n_iters.has_value(), "n_iters");
      break;
    case Mode::counterexample:
      require(c.chain.has_value(), "chain");
      chain_for(*c.chain);
      break;
    default:
      break;
  }
  at_least_one(c.R, "R");
  at_least_one(c.n_iters, "n_iters");
  at_least_one(c.max_steps, "max_steps");
  at_least_one(c.steps, "steps");
  at_least_one(c.n_runs, "n_runs");
  positive(c.nu_min, "nu_min");
  positive(c.nu_max, "nu_max");
  positive(c.alpha_max, "alpha_max");
  if (c.nu_min && c.nu_max && *c.nu_min > *c.nu_max) throw ValidationError("/nu_max", "must be at least nu_min");
  if (c.clamp) {
    if (!(c.clamp->floor > 0.0) || !std::isfinite(c.clamp->ceiling) || c.clamp->ceiling < c.clamp->floor)
      throw ValidationError("/clamp", "need 0 < floor <= ceiling < inf");
  }
  if (c.basis && c.mode != Mode::adapt) throw ValidationError("/basis", "only used by mode adapt");
}

RunOutcome run_experiment(ExperimentConfig config, const RunOptions& options) {
  RunOutcome outcome;
  const auto started = std::chrono::steady_clock::now();
  if (options.seed) config.seed = *options.seed;
  if (options.threads != 0) set_max_threads(options.threads);

  try {
    validate_config(config);
    std::filesystem::path dir = options.out_dir;
    if (dir.empty()) dir = config.output_path.empty() ? std::filesystem::path(".") : resolve(options.base_dir, config.output_path);
    Outputs out(dir);

    ModeResult result;
    const auto model_path = resolve(options.base_dir, config.model_path);
    switch (config.mode) {
      case Mode::solve:
        result = run_solve(config, load_model_file(model_path), out);
        break;
      case Mode::constants:
        result = run_constants(config, load_model_file(model_path), out);
        break;
      case Mode::simulate:
        result = run_simulate(config, load_model_file(model_path), out);
        break;
      case Mode::adapt:
        result = run_adapt(config, load_model_file(model_path), out, options.with_timing);
        break;
      case Mode::eigen:
        result = run_eigen(config, load_eigen_model_file(model_path), out);
        break;
      case Mode::counterexample:
        result = run_counterexample(config, out);
        break;
    }

    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    outcome.summary = {{"mode", to_string(config.mode)},
                       {"config", config_to_json(config)},
                       {"metrics", std::move(result.metrics)},
                       {"wall_ms", wall_ms},
                       {"censored_total", result.censored_total},
                       {"build_id", build_id()}};
    {
      auto summary = out.open("summary.json");
      summary << outcome.summary.dump(2) << '\n';
      if (!summary) throw ValidationError((dir / "summary.json").string(), "write failed");
    }
    outcome.files = out.files();
    outcome.message = fmt::format("{} finished in {:.1f} ms", to_string(config.mode), wall_ms);
  } catch (const ValidationError& e) {
    outcome.exit_code = 2;
    outcome.message = e.what();
  } catch (const DomainError& e) {
    outcome.exit_code = 2;
    outcome.message = e.what();
  } catch (const json::exception& e) {
    outcome.exit_code = 2;
    outcome.message = e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = 3;
    outcome.message = e.what();
  }
  return outcome;
}

std::string build_id() { return ADAPTIS_BUILD_ID; }

}  // namespace adaptis
