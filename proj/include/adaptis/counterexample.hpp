#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "adaptis/rng.hpp"

namespace adaptis {

/// Chain on [0, inf) started at 1: from x > 0 jump to 1 with probability p(x),
/// otherwise move to x/2. From x = 1 the orbit is {2^-j}, so the state is
/// tracked exactly as the integer level j (x = 2^-j).
struct HalvingChainSpec {
  std::string label;
  std::function<double(std::uint64_t level)> p;

  /// p(j) = 1/(j+1): sum over levels diverges, returns to 1 recur.
  static HalvingChainSpec divergent();
  /// p(j) = 0.1 * 4^-j: summable even with (1+eps)^j weights for eps < 3.
  static HalvingChainSpec summable();
  static HalvingChainSpec constant(double p);
};

struct HalvingRun {
  std::size_t visits_to_one = 0;       // visits at times 1..steps
  std::uint64_t final_level = 0;
  std::uint64_t deepest_level = 0;     // level of the smallest state reached
  std::vector<std::size_t> visit_times;
};

/// Each step draws u and jumps to level 0 when u < p(level), else descends.
HalvingRun simulate_halving(const HalvingChainSpec& spec, std::size_t steps, Xoshiro256& rng);
HalvingRun simulate_halving(const HalvingChainSpec& spec, std::size_t steps, std::uint64_t seed);

struct HalvingSummary {
  std::string label;
  std::size_t steps = 0;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  double mean_visits = 0.0;
  double frac_at_least_5 = 0.0;  // runs with >= 5 visits to 1
  double frac_at_most_3 = 0.0;   // runs with <= 3 visits to 1
  double median_final_level = 0.0;
  double frac_final_level_half = 0.0;  // runs with final level >= steps/2
  std::vector<HalvingRun> per_run;     // visit_times dropped
};

/// n_runs independent runs; run i uses the stream (seed, i).
HalvingSummary classify_experiment(const HalvingChainSpec& spec, std::size_t steps, std::size_t n_runs,
                                   std::uint64_t seed);

/// Columns run_index,visits_to_one,min_level,final_level (min_level is the
/// level of the smallest state reached).
void write_halving_csv(std::ostream& out, const HalvingSummary& summary);

}  // namespace adaptis
