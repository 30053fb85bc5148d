#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adaptis/adaptive_loop.hpp"
#include "adaptis/errors.hpp"
#include "adaptis/exact_solver.hpp"
#include "adaptis/models.hpp"
#include "adaptis/parallel.hpp"
#include "fixtures.hpp"

using namespace adaptis;

namespace {

ValueFunction vf(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.begin());
  return {out};
}

AdaptiveConfig config(std::size_t R, std::size_t iters, std::uint64_t seed) {
  AdaptiveConfig c;
  c.replications = R;
  c.iterations = iters;
  c.seed = seed;
  return c;
}

// 1 -> 2 -> 3 -> 0, deterministic, reward 1 on the last step.
MarkovRewardModel ladder_model() {
  Matrix p = Matrix::Zero(4, 4);
  p(0, 0) = p(1, 2) = p(2, 3) = p(3, 0) = 1.0;
  Matrix s = Matrix::Zero(4, 4);
  s(3, 0) = 1.0;
  return MarkovRewardModel(p, s, Matrix::Ones(4, 4), {0});
}

}  // namespace

TEST_CASE("tabular fit is the clamped estimate") {
  const auto m = two_state_model();
  const auto tab = BasisModel::tabular(m);
  const auto inside = fit_values(Vector{{2.1, 1.9}}, tab, {0.1, 4.0});
  CHECK(inside[0] == 2.1);
  CHECK(inside[1] == 1.9);
  const auto clipped = fit_values(Vector{{0.0, 5.0}}, tab, {0.5, 4.0});
  CHECK(clipped[0] == 0.5);
  CHECK(clipped[1] == 4.0);
}

TEST_CASE("constant regressor fits the mean") {
  const auto m = two_state_model();
  const auto b = BasisModel::regression(m, {1, 2}, Vector::Zero(2), Matrix::Ones(2, 1));
  CHECK_FALSE(b.is_tabular());
  const auto fit = fit_values(Vector{{2.1, 1.9}}, b, {0.1, 4.0});
  CHECK(fit[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fit[1] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("regression fit recovers coefficients and extrapolates to non-design states") {
  Xoshiro256 rng(12);
  RandomModelOptions o;
  o.n_transient = 6;
  const auto m = random_model(o, rng);
  Matrix basis(6, 2);
  for (auto& x : basis.reshaped()) x = rng.uniform();
  const Vector offset = Vector::Constant(6, 0.25);
  const auto b = BasisModel::regression(m, {0, 1, 3, 5}, offset, basis);
  const Vector alpha{{1.5, 2.5}};
  const Vector truth = offset + basis * alpha;
  Vector ybar(4);
  for (Eigen::Index i = 0; i < 4; ++i) ybar(i) = truth(static_cast<Eigen::Index>(b.design_slots()[static_cast<std::size_t>(i)]));
  const auto fit = fit_values(ybar, b, {1e-3, 100.0});
  CHECK((fit.values - truth).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("basis construction errors") {
  const auto m = two_state_model();
  Matrix rank_one{{1.0, 2.0}, {2.0, 4.0}};
  CHECK_THROWS_AS(BasisModel::regression(m, {1, 2}, Vector::Zero(2), rank_one), DomainError);
  CHECK_THROWS_AS(BasisModel::regression(m, {0}, Vector::Zero(2), Matrix::Ones(2, 1)), DomainError);
  CHECK_THROWS_AS(BasisModel::regression(m, {1, 1}, Vector::Zero(2), Matrix::Ones(2, 1)), DomainError);
  CHECK_THROWS_AS(BasisModel::regression(m, {1}, Vector::Zero(2), Matrix::Identity(2, 2)), DomainError);
  CHECK_THROWS_AS(BasisModel::regression(m, {1, 2}, Vector::Zero(3), Matrix::Ones(2, 1)), DomainError);
  const auto tab = BasisModel::tabular(m);
  CHECK_THROWS_AS(fit_values(Vector{{1.0, 1.0}}, tab, {0.0, 4.0}), DomainError);
  CHECK_THROWS_AS(fit_values(Vector{{1.0, 1.0}}, tab, {3.0, 2.0}), DomainError);
  CHECK_THROWS_AS(fit_values(Vector{{1.0}}, tab, {0.5, 4.0}), DomainError);
}

TEST_CASE("default clamp is [mu_min / 2, 2 mu_max]") {
  const auto c = default_clamp(vf({1.0, 3.0}));
  CHECK(c.floor == 0.5);
  CHECK(c.ceiling == 6.0);
}

TEST_CASE("starting at the exact value stays there") {
  const auto m = two_state_model();
  auto cfg = config(100, 5, 1);
  cfg.stop_error = -1.0;  // run every iteration
  const auto trace = run_adaptive(m, BasisModel::tabular(m), solve_value(m).value, cfg);
  REQUIRE(trace.iterates.size() == 6);
  for (double e : trace.sup_errors) CHECK(e <= 1e-9);

  const auto five = fixtures::five_state_model();
  const auto basis = fixtures::five_state_basis(five);
  const auto trace5 = run_adaptive(five, basis, solve_value(five).value, cfg);
  for (double e : trace5.sup_errors) CHECK(e <= 1e-9);
}

TEST_CASE("two-state run converges and the trace is consistent") {
  const auto m = two_state_model();
  auto trace = run_adaptive(m, BasisModel::tabular(m), vf({1.0, 1.0}), config(1000, 20, 5));
  CHECK(trace.sup_errors.size() == trace.iterates.size());
  CHECK(trace.stats.size() + 1 == trace.iterates.size());
  CHECK(trace.sup_errors.back() < 1e-2);
  CHECK(estimate_rate(trace, 0) > 1.0);
  CHECK(trace.theta_hat.has_value());
  CHECK(trace.tabular);
  for (const auto& it : trace.iterates) {
    CHECK(it.min() >= trace.clamp.floor);
    CHECK(it.max() <= trace.clamp.ceiling);
  }
  for (double e : trace.sup_errors) {
    CHECK(std::isfinite(e));
    CHECK(e >= 0.0);
  }
}

TEST_CASE("iterates respect a user clamp") {
  const auto m = two_state_model();
  auto cfg = config(50, 6, 9);
  cfg.clamp = ClampBounds{1.9, 2.05};
  const auto trace = run_adaptive(m, BasisModel::tabular(m), vf({3.0, 0.5}), cfg);
  for (std::size_t n = 1; n < trace.iterates.size(); ++n) {
    CHECK(trace.iterates[n].min() >= 1.9);
    CHECK(trace.iterates[n].max() <= 2.05);
  }
}

TEST_CASE("a single replication still produces a trace") {
  const auto m = two_state_model();
  const auto trace = run_adaptive(m, BasisModel::tabular(m), vf({1.0, 3.0}), config(1, 5, 2));
  CHECK(trace.iterates.size() >= 2);
  CHECK(trace.stats.front().max_sample_var == 0.0);
}

TEST_CASE("run_adaptive input errors") {
  const auto m = two_state_model();
  const auto tab = BasisModel::tabular(m);
  CHECK_THROWS_AS(run_adaptive(m, tab, vf({1.0, 0.0}), config(10, 2, 0)), DomainError);
  CHECK_THROWS_AS(run_adaptive(m, tab, vf({1.0}), config(10, 2, 0)), DomainError);
  CHECK_THROWS_AS(run_adaptive(m, tab, vf({1.0, 1.0}), config(0, 2, 0)), DomainError);
}

TEST_CASE("traces are bit-identical across repeats and thread counts") {
  const auto m = fixtures::five_state_model();
  const auto basis = fixtures::five_state_basis(m);
  const ValueFunction init{Vector::Ones(5)};
  set_max_threads(1);
  const auto a = run_adaptive(m, basis, init, config(300, 4, 77));
  set_max_threads(3);
  const auto b = run_adaptive(m, basis, init, config(300, 4, 77));
  set_max_threads(0);
  std::ostringstream ca, cb;
  write_trace_csv(ca, a);
  write_trace_csv(cb, b);
  CHECK(ca.str() == cb.str());
  REQUIRE(a.iterates.size() == b.iterates.size());
  for (std::size_t n = 0; n < a.iterates.size(); ++n) CHECK(a.iterates[n].values == b.iterates[n].values);
  const auto c = run_adaptive(m, basis, init, config(300, 4, 78));
  CHECK(c.iterates[1].values != a.iterates[1].values);
}

TEST_CASE("an iteration with every path censored keeps the previous iterate") {
  const auto m = ladder_model();  // values (1, 1, 1) on states 1, 2, 3
  const auto design_one = BasisModel::regression(m, {1}, Vector::Zero(3), Matrix::Ones(3, 1));
  auto cfg = config(20, 2, 4);
  cfg.max_steps = 1;  // state 1 needs three steps to absorb
  const auto init = vf({0.8, 0.8, 0.8});
  const auto trace = run_adaptive(m, design_one, init, cfg);
  REQUIRE(trace.stats.size() == 2);
  CHECK(trace.stats[0].flagged);
  CHECK(trace.stats[0].censored == 20);
  CHECK(trace.iterates[1].values == init.values);
  CHECK(trace.censored_total() == 40);
}

TEST_CASE("rate estimator") {
  const std::vector<double> geometric{1.0, 0.1, 0.01, 0.001};
  CHECK(std::abs(estimate_rate(geometric, 0) - 10.0) <= 1e-9);
  const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
  CHECK(estimate_rate(flat, 0) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> with_burn{7.0, 3.0, 1.0, 0.5, 0.25, 0.125};
  CHECK(estimate_rate(with_burn, 2) == doctest::Approx(2.0).epsilon(1e-12));
  const std::vector<double> floored{1.0, 0.1, 0.01, 0.001, 1e-15, 5.0};
  CHECK(std::abs(estimate_rate(floored, 0) - 10.0) <= 1e-9);  // window stops at the floor
  const std::vector<double> short_window{1.0, 0.1, 0.0, 0.001};
  CHECK_THROWS_AS(estimate_rate(short_window, 0), NumericalError);
  CHECK_THROWS_AS(estimate_rate(geometric, 1), NumericalError);
}

TEST_CASE("contraction diagnostic") {
  const auto m = two_state_model();
  const auto tab = BasisModel::tabular(m);
  const auto mu = solve_value(m).value;
  const auto at_mu = contraction_diagnostic(m, tab, mu, 100, 10, 1);
  CHECK(at_mu.ratio == 0.0);

  const ValueFunction near{mu.values.array() + 0.1};
  const auto c1 = contraction_diagnostic(m, tab, near, 10'000, 200, 2);
  CHECK(c1.ratio < 1.0);
  CHECK(c1.ratio <= 1.5 * c1.bound);
  const ValueFunction nearer{mu.values.array() + 0.05};
  const auto c2 = contraction_diagnostic(m, tab, nearer, 10'000, 200, 3);
  CHECK(c2.ratio <= 2.0 * c1.ratio);
  CHECK(c2.ratio >= 0.5 * c1.ratio);
}

TEST_CASE("larger R gives smaller early errors") {
  const auto m = two_state_model();
  const auto tab = BasisModel::tabular(m);
  std::vector<double> small, large;
  for (std::uint64_t seed = 500; seed < 520; ++seed) {
    small.push_back(run_adaptive(m, tab, vf({1.0, 1.0}), config(1000, 2, seed)).sup_errors.back());
    large.push_back(run_adaptive(m, tab, vf({1.0, 1.0}), config(4000, 2, seed)).sup_errors.back());
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  CHECK(mean(large) <= mean(small));
}

TEST_CASE("two-step hit frequency and trace CSV") {
  const auto m = two_state_model();
  auto trace = run_adaptive(m, BasisModel::tabular(m), vf({1.0, 1.0}), config(1000, 20, 5));
  const double f = two_step_hit_frequency(trace, 1e-3);
  CHECK(f > 0.0);
  CHECK(f <= 1.0);
  AdaptiveTrace tiny;
  tiny.sup_errors = {1.0, 0.5};
  CHECK(two_step_hit_frequency(tiny, 1.0) == 0.0);
  tiny.sup_errors = {1.0, 0.5, 0.1, 0.05};
  CHECK(two_step_hit_frequency(tiny, 0.2) == 1.0);

  std::ostringstream csv;
  write_trace_csv(csv, trace);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "iter,sup_error,max_sample_var,censored_total,wall_ms");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  CHECK(rows.size() == trace.sup_errors.size());
  CHECK(rows.front().substr(rows.front().size() - 6) == ",0.000");
  CHECK(rows.back().substr(rows.back().size() - 3) == ",,,");
}
