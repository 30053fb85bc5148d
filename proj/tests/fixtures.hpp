#pragma once

// Shared models for the test suites and the pilot calibration tool.

#include "adaptis/adaptive_loop.hpp"
#include "adaptis/exact_solver.hpp"
#include "adaptis/models.hpp"

namespace adaptis::fixtures {

inline MarkovRewardModel five_state_model() {
  Xoshiro256 rng(derive_seed(2024, {5}));
  RandomModelOptions o;
  o.n_transient = 5;
  o.n_absorbing = 1;
  o.exit_floor = 0.2;
  return random_model(o, rng);
}

/// Two-column linear model whose span contains the exact value: random
/// columns B, coefficients (1, 1), offset mu - B (1, 1). Design states 0, 2, 4.
inline BasisModel five_state_basis(const MarkovRewardModel& model) {
  const auto mu = solve_value(model).value;
  Xoshiro256 rng(derive_seed(2024, {2}));
  Matrix basis(5, 2);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) basis(i, j) = 0.5 + rng.uniform();
  Vector offset = mu.values - basis * Vector::Ones(2);
  return BasisModel::regression(model, {0, 2, 4}, std::move(offset), std::move(basis));
}

}  // namespace adaptis::fixtures
