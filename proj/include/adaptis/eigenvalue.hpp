#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "adaptis/adaptive_loop.hpp"
#include "adaptis/chain_model.hpp"
#include "adaptis/importance_sampling.hpp"

namespace adaptis {

/// Nonnegative irreducible substochastic matrix on states 0..d. Row defects
/// are transitions to an implicit cemetery. State 0 is the return state.
class EigenModel {
 public:
  explicit EigenModel(Matrix transition);

  std::size_t d() const noexcept { return static_cast<std::size_t>(transition_.rows()) - 1; }
  const Matrix& transition() const noexcept { return transition_; }
  /// The matrix with row and column 0 removed (d x d).
  Matrix without_return_state() const;

 private:
  Matrix transition_;
};

/// Nonnegative entries, row sums <= 1 + 1e-12, irreducibility, and a
/// strictly smaller spectral radius once the return state is removed.
std::vector<Violation> validate_eigen_model(const EigenModel& model);

struct PerronFrobenius {
  double eigenvalue = 0.0;
  double exponent = 0.0;  // -log(eigenvalue), the root of mu_0(alpha) = 1
  Vector vector;          // positive, length d+1, component 0 equal to 1
  double residual = 0.0;  // |e^exponent P v - v|_inf
  std::size_t iterations = 0;
};

/// Power iteration on P + I until |P v / lambda - v|_inf <= tol.
/// DomainError for a reducible matrix, NumericalError after 1e5 iterations.
PerronFrobenius eigen_oracle(const EigenModel& model, double tol = 1e-11);

/// The eigen problem recast as an absorbing reward model with discount e^alpha:
/// states 0 (return target, absorbing), 1..d (transient), d+1 (cemetery,
/// absorbing) and d+2 (a transient copy of state 0 used as the start of
/// regeneration cycles). Reward 1 on every transition into 0, else 0.
MarkovRewardModel regeneration_model(const EigenModel& model, double alpha);

/// State id of the start-of-cycle copy of state 0 in regeneration_model().
inline State cycle_start(const EigenModel& model) { return model.d() + 2; }

/// Tilting over 1..d extended with 1 at the cycle start (its value is never
/// used by the kernel, and mu_0 = 1 at the root).
ValueFunction extend_eigen_tilting(const Vector& nu);

/// Tilted kernel for the eigen problem. Discounts are constant, so the
/// kernel and likelihood ratios are the same for every alpha.
TiltedModel build_eigen_tilted(const EigenModel& model, const Vector& nu, double alpha = 0.0);

struct RegenerationSample {
  std::size_t tau;  // first n >= 1 with X_n = 0
  double log_L;     // log likelihood ratio at tau
};

struct RegenerationBatch {
  std::vector<RegenerationSample> samples;  // uncensored cycles only
  std::size_t censored = 0;
};

/// R cycles from `start` (a state id of regeneration_model) until the chain
/// hits 0. Replication i uses the stream (seed, start, i). Throws
/// std::logic_error if a path reaches the cemetery, which has zero tilted mass.
RegenerationBatch simulate_regeneration(const TiltedModel& tilted, State start, std::size_t replications,
                                        std::uint64_t seed, std::size_t max_steps);

/// (1/R) sum_i exp(alpha tau_i + log_L_i).
double mean_cycle_weight(std::span<const RegenerationSample> samples, double alpha);

struct ExponentRoot {
  double raw = 0.0;       // root before clamping
  double value = 0.0;     // clamped into [0, alpha_max]
  double residual = 0.0;  // |mean_cycle_weight(raw) - 1|
};

/// Root of mean_cycle_weight(alpha) = 1 by bracket doubling and bisection.
/// The function is strictly increasing (every tau >= 1), so the root is unique.
ExponentRoot solve_exponent(std::span<const RegenerationSample> samples, double alpha_max);

/// -log(spectral radius without the return state) - 1e-3.
double default_alpha_max(const EigenModel& model);

struct EigenConfig {
  std::size_t replications = 10'000;
  std::size_t iterations = 10;
  std::uint64_t seed = 0;
  std::optional<double> alpha_max;
  std::optional<ClampBounds> clamp;  // default: [0.5 min v, 2 max v] over 1..d
  std::size_t max_steps = 100'000;
};

struct EigenIteration {
  double alpha_hat = 0.0;
  double alpha_raw = 0.0;
  double alpha_err = 0.0;   // |alpha_hat - exponent|
  double nu_sup_err = 0.0;  // |nu^(n) - v|_sup over 1..d, for the iterate used in this step
  double value_bias = 0.0;  // mean over x of (estimate at alpha_hat - v_x)
  std::size_t censored = 0;
};

struct EigenTrace {
  PerronFrobenius oracle;
  double alpha_max = 0.0;
  ClampBounds clamp;
  std::vector<Vector> iterates;  // nu^(0) .. nu^(N) over 1..d
  std::vector<EigenIteration> records;
};

/// Each iteration: (1) simulate R cycles from state 0 under the current
/// tilting and solve for alpha_hat; (2) estimate mu_x(alpha_hat) for every
/// x in 1..d from R paths each, clamp, and take that as the next tilting.
EigenTrace run_eigen_adaptive(const EigenModel& model, const Vector& init_nu, const EigenConfig& config);

/// Columns iter,alpha_hat,alpha_err,nu_sup_err,censored.
void write_eigen_trace_csv(std::ostream& out, const EigenTrace& trace);

}  // namespace adaptis
