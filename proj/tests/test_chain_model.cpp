#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "adaptis/errors.hpp"
#include "adaptis/exact_solver.hpp"
#include "adaptis/model_io.hpp"
#include "adaptis/models.hpp"

using namespace adaptis;

namespace {

bool has_violation(const std::vector<Violation>& vs, const std::string& text, const std::string& path = "") {
  for (const auto& v : vs)
    if (v.message.find(text) != std::string::npos && (path.empty() || v.path == path)) return true;
  return false;
}

// Forward propagation of the sub-distribution on A, independent of the
// backward recursion used by the library.
double forward_absorption_reward(const MarkovRewardModel& model, std::size_t horizon) {
  const auto n = static_cast<Eigen::Index>(model.n_states());
  double worst = std::numeric_limits<double>::infinity();
  for (State x0 : model.transient()) {
    Vector dist = Vector::Zero(n);
    dist(static_cast<Eigen::Index>(x0)) = 1.0;
    double total = 0.0;
    for (std::size_t step = 0; step < horizon; ++step) {
      Vector next = Vector::Zero(n);
      for (State x : model.transient()) {
        const auto i = static_cast<Eigen::Index>(x);
        if (dist(i) == 0.0) continue;
        for (Eigen::Index y = 0; y < n; ++y) {
          const double mass = dist(i) * model.transition()(i, y);
          if (model.is_absorbing(static_cast<State>(y))) total += mass * model.reward()(i, y);
          else next(y) += mass;
        }
      }
      dist = next;
    }
    worst = std::min(worst, total);
  }
  return worst;
}

MarkovRewardModel with_transition(const MarkovRewardModel& m, Matrix p) {
  return MarkovRewardModel(std::move(p), m.reward(), m.discount(), m.absorbing());
}

}  // namespace

TEST_CASE("two-state model is valid") {
  const auto m = two_state_model();
  CHECK(validate_model(m).empty());
  CHECK(m.n_states() == 3);
  CHECK(m.transient() == std::vector<State>{1, 2});
  CHECK(m.absorbing() == std::vector<State>{0});
  CHECK(m.transient_index(2) == std::optional<std::size_t>(1));
  CHECK_FALSE(m.transient_index(0).has_value());
  CHECK(m.is_absorbing(0));
}

TEST_CASE("row summing to 0.9 is reported as not stochastic") {
  const auto m = two_state_model();
  Matrix p = m.transition();
  p(1, 2) = 0.4;
  const auto vs = validate_model(with_transition(m, p));
  CHECK(has_violation(vs, "row not stochastic", "/P/1"));
}

TEST_CASE("zero discount is reported with its indices") {
  const auto m = two_state_model();
  Matrix beta = m.discount();
  beta(1, 2) = 0.0;
  const auto vs = validate_model(MarkovRewardModel(m.transition(), m.reward(), beta, m.absorbing()));
  CHECK(has_violation(vs, "beta not strictly positive", "/beta/1/2"));
}

TEST_CASE("other violations: negative probability, negative reward, unreachable K, no transient states") {
  const auto m = two_state_model();
  Matrix p = m.transition();
  p(1, 0) = -0.5;
  p(1, 2) = 1.5;
  CHECK(has_violation(validate_model(with_transition(m, p)), "outside [0,1]", "/P/1/0"));

  Matrix s = m.reward();
  s(2, 1) = -1.0;
  CHECK(has_violation(validate_model(MarkovRewardModel(m.transition(), s, m.discount(), m.absorbing())), "negative",
                      "/s/2/1"));

  Matrix closed = m.transition();
  closed.row(1) << 0.0, 0.0, 1.0;
  closed.row(2) << 0.0, 1.0, 0.0;
  CHECK(has_violation(validate_model(with_transition(m, closed)), "absorbing set unreachable from state 1"));

  const MarkovRewardModel all_absorbing(Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Ones(2, 2), {0, 1});
  CHECK(has_violation(validate_model(all_absorbing), "no transient states"));
}

TEST_CASE("construction rejects shape mismatches and bad absorbing ids") {
  CHECK_THROWS_AS(MarkovRewardModel(Matrix::Identity(2, 2), Matrix::Zero(3, 3), Matrix::Ones(2, 2), {0}), DomainError);
  CHECK_THROWS_AS(MarkovRewardModel(Matrix::Identity(2, 3), Matrix::Zero(2, 3), Matrix::Ones(2, 3), {0}), DomainError);
  CHECK_THROWS_AS(MarkovRewardModel(Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Ones(2, 2), {5}), DomainError);
}

TEST_CASE("absorption reward within a horizon") {
  const auto m = two_state_model();
  CHECK(absorption_reward_within(m, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(absorption_reward_within(m, 2) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(absorption_reward_within(m, 0), DomainError);

  Matrix closed = m.transition();
  closed.row(2) << 0.0, 0.0, 1.0;  // state 2 never leaves
  const auto stuck = with_transition(m, closed);
  for (std::size_t h : {1, 2, 10, 50}) CHECK(absorption_reward_within(stuck, h) == 0.0);
}

TEST_CASE("absorption reward: backward recursion agrees with forward propagation, nondecreasing, bounded") {
  Xoshiro256 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    RandomModelOptions o;
    o.n_transient = 2 + trial % 6;
    o.n_absorbing = 1 + trial % 2;
    o.exit_floor = 0.05;
    o.sparsity = 0.3;
    const auto m = random_model(o, rng);
    REQUIRE(validate_model(m).empty());
    const double reward_sup = m.reward().maxCoeff();
    double previous = 0.0;
    for (std::size_t h = 1; h <= 12; ++h) {
      const double g = absorption_reward_within(m, h);
      CHECK(std::abs(g - forward_absorption_reward(m, h)) <= 1e-13);
      CHECK(g >= previous - 1e-15);
      CHECK(g <= reward_sup + 1e-15);
      previous = g;
    }
  }
}

TEST_CASE("structural constants of the two-state model") {
  const auto m = two_state_model();
  const auto mu = solve_value(m).value;
  const auto c = compute_constants(m, mu, 1.0, 4.0, default_horizon_cap(m));
  CHECK(c.reward_sup == 1.0);
  CHECK(c.discount_sup == 1.0);
  CHECK(c.discount_inf == 1.0);
  CHECK(c.mu_min == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(c.mu_max == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(c.horizon == 1);
  CHECK(c.gamma == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.kappa == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(c.geometric_rate == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(c.growth == doctest::Approx(5.0 * 2.0 / 2.0).epsilon(1e-14));

  // Degenerate box at mu = 2 with unit rewards and discounts: H = (1 + c) / c.
  const auto tight = compute_constants(m, mu, mu.min(), mu.max(), 30);
  CHECK(tight.growth == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("compute_constants error paths") {
  const auto m = two_state_model();
  const auto mu = solve_value(m).value;
  CHECK_THROWS_AS(compute_constants(m, mu, 2.5, 4.0, 30), DomainError);  // nu_min above mu_min
  CHECK_THROWS_AS(compute_constants(m, mu, 1.0, 1.5, 30), DomainError);  // nu_max below mu_max
  CHECK_THROWS_AS(compute_constants(m, mu, 0.0, 4.0, 30), DomainError);
  CHECK_THROWS_AS(compute_constants(m, ValueFunction{Vector::Ones(3)}, 0.5, 4.0, 30), DomainError);

  // Terminal rewards are zero: every path is absorbed but earns nothing on the last step.
  Matrix s = m.reward();
  s(1, 0) = s(2, 0) = 0.0;
  const MarkovRewardModel silent(m.transition(), s, m.discount(), m.absorbing());
  const auto silent_mu = solve_value(silent).value;
  CHECK_THROWS_AS(compute_constants(silent, silent_mu, 0.5 * silent_mu.min(), 2 * silent_mu.max(), 30),
                  NumericalError);
}

TEST_CASE("constants invariants on random models, and bit-identical repeats") {
  Xoshiro256 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    RandomModelOptions o;
    o.n_transient = 1 + trial % 8;
    o.discount_lo = 0.2;
    const auto m = random_model(o, rng);
    const auto mu = solve_value(m).value;
    const auto c = compute_constants(m, mu, 0.5 * mu.min(), 3.0 * mu.max(), default_horizon_cap(m));
    CHECK(c.discount_inf > 0.0);
    CHECK(c.discount_inf <= c.discount_sup);
    CHECK(c.mu_min > 0.0);
    CHECK(c.kappa > 0.0);
    CHECK(c.kappa < 1.0);
    CHECK(c.growth >= 1.0);
    CHECK(c.geometric_rate > 0.0);
    CHECK(c.geometric_rate <= 1.0);
    CHECK(c.gamma > 0.0);
    const auto again = compute_constants(m, mu, 0.5 * mu.min(), 3.0 * mu.max(), default_horizon_cap(m));
    CHECK(std::memcmp(&c, &again, sizeof c) == 0);
  }
}

TEST_CASE("sup_distance and extend_to_states") {
  const auto m = two_state_model();
  const ValueFunction a{Vector{{1.0, 3.0}}}, b{Vector{{1.5, 2.0}}};
  CHECK(sup_distance(a, b) == 1.0);
  const Vector full = extend_to_states(m, a);
  CHECK(full.size() == 3);
  CHECK(full(0) == 0.0);
  CHECK(full(1) == 1.0);
  CHECK(full(2) == 3.0);
}

TEST_CASE("model JSON round trip and file loading") {
  const auto m = two_state_model();
  const auto back = model_from_json(model_to_json(m));
  CHECK(back.transition() == m.transition());
  CHECK(back.reward() == m.reward());
  CHECK(back.discount() == m.discount());
  CHECK(back.absorbing() == m.absorbing());

  const auto loaded = load_model_file(std::filesystem::path(ADAPTIS_DATA_DIR) / "twostate.json");
  CHECK(loaded.transition() == m.transition());
  CHECK(loaded.reward() == m.reward());
}

TEST_CASE("model JSON errors carry the offending path") {
  auto doc = model_to_json(two_state_model());
  auto expect_path = [](const nlohmann::json& d, const std::string& path) {
    try {
      model_from_json(d);
      FAIL("no error for " << path);
    } catch (const ValidationError& e) {
      CHECK(e.path() == path);
    }
  };
  auto bad = doc;
  bad["P"][1][2] = "x";
  expect_path(bad, "/P/1/2");
  bad = doc;
  bad.erase("beta");
  expect_path(bad, "/beta");
  bad = doc;
  bad["absorbing"][0] = 7;
  expect_path(bad, "/absorbing/0");
  bad = doc;
  bad["s"].erase(2);
  expect_path(bad, "/s");

  const auto dir = std::filesystem::temp_directory_path() / "adaptis_model_io_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "broken.json") << "{ not json";
    auto invalid = doc;
    invalid["P"][1][2] = 0.4;
    std::ofstream(dir / "invalid.json") << invalid.dump();
  }
  try {
    load_model_file(dir / "missing.json");
    FAIL("missing file accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("missing.json") != std::string::npos);
  }
  CHECK_THROWS_AS(load_model_file(dir / "broken.json"), ValidationError);
  try {
    load_model_file(dir / "invalid.json");
    FAIL("invalid model accepted");
  } catch (const ValidationError& e) {
    CHECK(e.path() == "/P/1");
    CHECK(std::string(e.what()).find("row not stochastic") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("random models are valid and respect the exit floor") {
  Xoshiro256 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    RandomModelOptions o;
    o.n_transient = 1 + trial % 10;
    o.n_absorbing = 1 + trial % 3;
    o.sparsity = 0.5;
    const auto m = random_model(o, rng);
    CHECK(validate_model(m).empty());
    const auto sol = solve_value(m);
    CHECK(sol.spectral_radius <= 1.0 - o.exit_floor + 1e-12);
  }
}
