#pragma once

#include <cstddef>
#include <vector>

#include "adaptis/chain_model.hpp"
#include "adaptis/importance_sampling.hpp"

namespace adaptis {

/// Spectral radius of a nonnegative square matrix by power iteration on the
/// shifted matrix A + I (same Perron root, no periodic oscillation). Returns 0
/// for an empty matrix.
double spectral_radius(const Matrix& nonnegative, int iterations = 200);

/// h(x) = sum_y beta(x,y) s(x,y) P(x,y) over the transient states.
Vector expected_step_reward(const MarkovRewardModel& model);

/// beta-weighted transition matrix restricted to transient x transient.
Matrix discounted_transient_block(const MarkovRewardModel& model);

struct ValueSolution {
  ValueFunction value;
  double spectral_radius = 0.0;
  /// Transient states whose value is not positive; by convention such states
  /// belong in K.
  std::vector<Violation> convention_violations;
};

/// Exact value function: the solution of (I - P_beta|A) u = h, solved by
/// dense LU with partial pivoting after checking that the spectral radius of
/// P_beta|A is below 1 - 1e-9 (NumericalError "mu diverges" otherwise).
ValueSolution solve_value(const MarkovRewardModel& model);

/// sum_{n=0}^{N} (P_beta|A)^n h.
ValueFunction truncated_series_value(const MarkovRewardModel& model, std::size_t terms);

struct ExactMoments {
  ValueFunction mean;
  ValueFunction second_moment;
  bool finite_variance = true;
  double second_moment_radius = 0.0;

  /// second_moment - mean^2, meaningful only when finite_variance.
  Vector variance() const;
};

/// First and second moments of the filtered estimator under the tilted
/// kernel, from one-step conditioning. With a(x,y) = l(x,y) beta(x,y):
///
///   m(x) = sum_y Q a (s + m(y) 1{y in A})
///   w(x) = sum_y Q a^2 (s^2 + 2 s m(y) 1{y in A} + w(y) 1{y in A})
///
/// Both are linear systems over the transient states. When the second-moment
/// operator has spectral radius >= 1 - 1e-9 the variance is infinite:
/// finite_variance is false and second_moment is left at +inf.
ExactMoments exact_moments(const TiltedModel& tilted);
ExactMoments exact_moments(const MarkovRewardModel& model, const ValueFunction& nu);

struct EnumeratedMoments {
  Vector mean;           // E[Y; tau <= horizon] per transient start
  Vector second_moment;  // E[Y^2; tau <= horizon]
  Vector tail_mass;      // Q(tau > horizon)
  double paths = 0.0;    // number of enumerated positive-probability paths
};

/// Enumerates every positive-probability path of length <= horizon under the
/// tilted kernel from each transient state. Throws DomainError when the path
/// count exceeds `path_budget`.
EnumeratedMoments brute_force_moments(const TiltedModel& tilted, std::size_t horizon, double path_budget = 1e7);

}  // namespace adaptis
