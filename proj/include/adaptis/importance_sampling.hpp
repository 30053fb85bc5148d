#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "adaptis/chain_model.hpp"
#include "adaptis/rng.hpp"

namespace adaptis {

/// The change of measure induced by a positive tilting function nu:
///
///   Q(x,y) = [s(x,y) + nu(y)] beta(x,y) P(x,y) / g(x),   g(x) = h(x) + (P_beta nu)(x),
///   l(x,y) = g(x) / ([s(x,y) + nu(y)] beta(x,y)),
///
/// for transient x; absorbing rows keep P and l = 1. Transitions with
/// s(x,y) + nu(y) = 0 get Q = 0 and l = +inf, and are never sampled.
/// With nu equal to the exact value function this is the zero-variance kernel.
class TiltedModel {
 public:
  const MarkovRewardModel& base() const noexcept { return base_; }
  const ValueFunction& tilting() const noexcept { return nu_; }
  /// g over the transient states.
  const Vector& normalizer() const noexcept { return normalizer_; }
  const Matrix& kernel() const noexcept { return kernel_; }
  const Matrix& likelihood() const noexcept { return likelihood_; }
  double log_likelihood(State x, State y) const { return log_likelihood_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)); }
  double log_discount(State x, State y) const { return log_discount_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)); }

  /// Inverse-CDF draw from row x: the first target whose cumulative mass
  /// exceeds u strictly. Zero-mass targets are absent from the table.
  State sample_next(State x, double u) const;

 private:
  friend TiltedModel build_tilted(const MarkovRewardModel& model, const ValueFunction& nu);

  struct Step {
    double cumulative;
    State target;
  };

  TiltedModel(MarkovRewardModel base, ValueFunction nu) : base_(std::move(base)), nu_(std::move(nu)) {}

  MarkovRewardModel base_;
  ValueFunction nu_;
  Vector normalizer_;
  Matrix kernel_;
  Matrix likelihood_;
  Matrix log_likelihood_;
  Matrix log_discount_;
  std::vector<std::vector<Step>> rows_;
};

/// Throws DomainError when some nu entry is not strictly positive (or the
/// length is wrong) and NumericalError when a normalizer is not positive.
TiltedModel build_tilted(const MarkovRewardModel& model, const ValueFunction& nu);

struct Trajectory {
  std::vector<State> states;   // X_0..X_last, only when recorded
  std::vector<double> log_L;   // log L_n for n = 0..steps, only when recorded
  std::optional<std::size_t> tau;  // absorption step; empty when censored
  bool censored = false;
  std::size_t steps = 0;
  double log_L_final = 0.0;    // log L at the last simulated step
  double y_value = 0.0;        // filtered estimator (partial sum when censored)
  double terminal_reward = 0.0;
};

/// Simulates X_1, X_2, ... under the tilted kernel from transient x0 until
/// absorption or `max_steps` transitions. L and the discount products are
/// carried in log space; each reward term s * B_i * L_i is exponentiated on
/// its own. Throws DomainError if x0 is absorbing or max_steps is 0.
Trajectory simulate_path(const TiltedModel& tilted, State x0, Xoshiro256& rng, std::size_t max_steps,
                         bool record = true);

struct Replication {
  double y_value;
  std::size_t steps;
  double log_L;
  bool censored;
};

struct ValueEstimate {
  double mean = 0.0;
  double sample_variance = 0.0;  // unbiased; 0 when only one replication
  std::size_t censored_count = 0;
  bool insufficient_replications = false;
  std::vector<Replication> replications;
};

/// R independent replications of the filtered estimator from x0. Replication
/// i uses the stream derived from (seed, x0, i); the reduction runs in index
/// order, so results do not depend on the number of worker threads.
ValueEstimate estimate_value(const TiltedModel& tilted, State x0, std::size_t replications, std::uint64_t seed,
                             std::size_t max_steps);

/// Empirical P(tau > k) for k = 0..k_max under the tilted kernel (R >= 100).
std::vector<double> tail_survival(const TiltedModel& tilted, State x0, std::size_t replications,
                                  std::uint64_t seed, std::size_t k_max);

/// (1 - geometric_rate)^floor(k / horizon).
double survival_bound(const StructuralConstants& constants, std::size_t k);

/// (1 - kappa^m gamma)^floor(k / m): the block bound the geometric domination
/// is built from. Never larger than survival_bound().
double block_survival_bound(const StructuralConstants& constants, std::size_t k);

/// ceil(50 / geometric_rate).
std::size_t default_max_steps(const StructuralConstants& constants);

/// CSV with columns rep_index,x0,tau,y_value,log_L_tau,censored.
void write_replications_csv(std::ostream& out, State x0, const ValueEstimate& estimate, bool header = true);

}  // namespace adaptis
