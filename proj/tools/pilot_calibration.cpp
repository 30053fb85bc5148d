// Multi-seed pilot runs used to set the thresholds of the convergence,
// eigenvalue and counterexample checks. Seeds here are disjoint from the
// ones used by the acceptance suite.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "adaptis/counterexample.hpp"
#include "adaptis/eigenvalue.hpp"
#include "adaptis/errors.hpp"
#include "adaptis/parallel.hpp"
#include "fixtures.hpp"

using namespace adaptis;

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
  return v[i];
}

void report_adaptive(const std::string& title, const MarkovRewardModel& model, const BasisModel& basis,
                     std::size_t replications, std::size_t seeds, std::uint64_t seed_base) {
  std::vector<double> errors, thetas;
  std::size_t pass = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t k = 0; k < seeds; ++k) {
    AdaptiveConfig cfg;
    cfg.replications = replications;
    cfg.iterations = 20;
    cfg.seed = seed_base + k;
    ValueFunction init{Vector::Ones(static_cast<Eigen::Index>(model.n_transient()))};
    auto trace = run_adaptive(model, basis, init, cfg);
    double theta = 0.0;
    try {
      theta = estimate_rate(trace, 0);
    } catch (const NumericalError&) {
      theta = std::numeric_limits<double>::infinity();  // reached the error floor too fast to fit
    }
    errors.push_back(trace.sup_errors.back());
    thetas.push_back(theta);
    if (trace.sup_errors.back() < 1e-2 && theta > 1.0) ++pass;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fmt::print("## {}\n\nR = {}, 20 iterations, init = 1, seeds {}..{}\n\n", title, replications, seed_base,
             seed_base + seeds - 1);
  fmt::print("| statistic | median | 90% | max |\n|---|---|---|---|\n");
  fmt::print("| final sup error | {:.3e} | {:.3e} | {:.3e} |\n", quantile(errors, 0.5), quantile(errors, 0.9),
             quantile(errors, 1.0));
  fmt::print("| theta_hat (min side) | {:.3g} | {:.3g} (10%) | {:.3g} (min) |\n", quantile(thetas, 0.5),
             quantile(thetas, 0.1), quantile(thetas, 0.0));
  fmt::print("\npass (error < 1e-2 and theta_hat > 1): {}/{}; {:.1f} s total\n\n", pass, seeds, secs);
}

void report_eigen(double init, std::size_t seeds, std::uint64_t seed_base) {
  const auto model = two_by_two_eigen_model();
  std::vector<double> errs;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t k = 0; k < seeds; ++k) {
    EigenConfig cfg;
    cfg.replications = 10'000;
    cfg.iterations = 10;
    cfg.seed = seed_base + k;
    const auto trace = run_eigen_adaptive(model, Vector::Constant(1, init), cfg);
    errs.push_back(trace.records.back().alpha_err);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto within = std::count_if(errs.begin(), errs.end(), [](double e) { return e <= 5e-3; });
  fmt::print("## Eigenvalue, 2x2 model, init = ({})\n\nR = 10^4, 10 iterations, seeds {}..{}\n\n", init, seed_base,
             seed_base + seeds - 1);
  fmt::print("|alpha_hat - alpha*|: median {:.3e}, 90% {:.3e}, max {:.3e}\n\n", quantile(errs, 0.5),
             quantile(errs, 0.9), quantile(errs, 1.0));
  fmt::print("within 5e-3: {}/{}; {:.1f} s total\n\n", within, seeds, secs);
}

void report_halving(std::uint64_t seed) {
  fmt::print("## Halving chain\n\n10^5 steps, 100 runs, seed {}\n\n", seed);
  fmt::print("| chain | mean visits | >= 5 visits | <= 3 visits | median final level | final level >= 5e4 |\n");
  fmt::print("|---|---|---|---|---|---|\n");
  const HalvingChainSpec shifted{"divergent 1/(j+2)", [](std::uint64_t j) { return 1.0 / static_cast<double>(j + 2); }};
  for (const auto& spec : {HalvingChainSpec::divergent(), shifted, HalvingChainSpec::summable()}) {
    const auto s = classify_experiment(spec, 100'000, 100, seed);
    fmt::print("| {} | {:.1f} | {:.2f} | {:.2f} | {:.0f} | {:.2f} |\n", s.label, s.mean_visits, s.frac_at_least_5,
               s.frac_at_most_3, s.median_final_level, s.frac_final_level_half);
  }
  fmt::print("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pilot calibration runs"};
  std::size_t seeds = 40;
  std::uint64_t seed_base = 90'001;
  unsigned threads = 0;
  app.add_option("--seeds", seeds, "seeds per experiment");
  app.add_option("--seed-base", seed_base, "first seed");
  app.add_option("--threads", threads, "worker thread cap");
  CLI11_PARSE(app, argc, argv);
  if (threads) set_max_threads(threads);

  fmt::print("# Pilot calibration\n\n");
  const auto two = two_state_model();
  report_adaptive("Adaptive loop, two-state model, tabular", two, BasisModel::tabular(two), 1000, seeds, seed_base);
  const auto five = fixtures::five_state_model();
  report_adaptive("Adaptive loop, five-state model, two basis functions", five, fixtures::five_state_basis(five),
                  4000, seeds, seed_base);
  report_eigen(1.0, seeds, seed_base);
  report_eigen(3.0, seeds, seed_base);
  report_halving(seed_base);
  return 0;
}
