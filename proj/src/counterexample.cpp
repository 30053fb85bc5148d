#include "adaptis/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "adaptis/errors.hpp"
#include "adaptis/parallel.hpp"

namespace adaptis {

HalvingChainSpec HalvingChainSpec::divergent() {
  return {"divergent", [](std::uint64_t j) { return 1.0 / (static_cast<double>(j) + 1.0); }};
}

HalvingChainSpec HalvingChainSpec::summable() {
  return {"summable", [](std::uint64_t j) { return 0.1 * std::pow(4.0, -static_cast<double>(j)); }};
}

HalvingChainSpec HalvingChainSpec::constant(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("constant jump probability must lie in [0, 1]");
  return {fmt::format("constant({})", p), [p](std::uint64_t) { return p; }};
}

HalvingRun simulate_halving(const HalvingChainSpec& spec, std::size_t steps, Xoshiro256& rng) {
  if (steps == 0) throw DomainError("steps must be at least 1");
  HalvingRun run;
  std::uint64_t level = 0;
  for (std::size_t t = 1; t <= steps; ++t) {
    const double p = spec.p(level);
    if (!(p >= 0.0 && p <= 1.0))
      throw DomainError(fmt::format("{}: jump probability {} at level {} is outside [0, 1]", spec.label, p, level));
    if (rng.uniform() < p) {
      level = 0;
      ++run.visits_to_one;
      run.visit_times.push_back(t);
    } else {
      ++level;
      run.deepest_level = std::max(run.deepest_level, level);
    }
  }
  run.final_level = level;
  return run;
}

HalvingRun simulate_halving(const HalvingChainSpec& spec, std::size_t steps, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  return simulate_halving(spec, steps, rng);
}

HalvingSummary classify_experiment(const HalvingChainSpec& spec, std::size_t steps, std::size_t n_runs,
                                   std::uint64_t seed) {
  if (n_runs == 0) throw DomainError("n_runs must be at least 1");
  HalvingSummary out;
  out.label = spec.label;
  out.steps = steps;
  out.runs = n_runs;
  out.seed = seed;
  out.per_run.resize(n_runs);
  parallel_for(n_runs, [&](std::size_t i) {
    Xoshiro256 rng = make_stream(seed, {static_cast<std::uint64_t>(i)});
    HalvingRun run = simulate_halving(spec, steps, rng);
    run.visit_times.clear();
    run.visit_times.shrink_to_fit();
    out.per_run[i] = std::move(run);
  });

  double visits = 0.0;
  std::size_t many = 0, few = 0, deep = 0;
  std::vector<double> finals;
  finals.reserve(n_runs);
  for (const auto& r : out.per_run) {
    visits += static_cast<double>(r.visits_to_one);
    if (r.visits_to_one >= 5) ++many;
    if (r.visits_to_one <= 3) ++few;
    if (2 * r.final_level >= steps) ++deep;
    finals.push_back(static_cast<double>(r.final_level));
  }
  const double k = static_cast<double>(n_runs);
  out.mean_visits = visits / k;
  out.frac_at_least_5 = static_cast<double>(many) / k;
  out.frac_at_most_3 = static_cast<double>(few) / k;
  out.frac_final_level_half = static_cast<double>(deep) / k;
  std::sort(finals.begin(), finals.end());
  out.median_final_level =
      n_runs % 2 == 1 ? finals[n_runs / 2] : 0.5 * (finals[n_runs / 2 - 1] + finals[n_runs / 2]);
  return out;
}

void write_halving_csv(std::ostream& out, const HalvingSummary& summary) {
  out << "run_index,visits_to_one,min_level,final_level\n";
  for (std::size_t i = 0; i < summary.per_run.size(); ++i) {
    const auto& r = summary.per_run[i];
    fmt::print(out, "{},{},{},{}\n", i, r.visits_to_one, r.deepest_level, r.final_level);
  }
}

}  // namespace adaptis
