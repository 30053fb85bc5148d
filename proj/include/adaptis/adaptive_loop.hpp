#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "adaptis/chain_model.hpp"

namespace adaptis {

/// Linear model for the value function, mu(x; alpha) = b0(x) + B(x) alpha,
/// fitted from estimates at a set of design states. The tabular model has
/// every transient state as a design state and B = I.
class BasisModel {
 public:
  static BasisModel tabular(const MarkovRewardModel& model);

  /// `design` are state ids (must be transient, distinct); `offset` has one
  /// entry per transient state; `basis` is n_transient x p. Throws
  /// DomainError when the design rows of `basis` are not of full column rank.
  static BasisModel regression(const MarkovRewardModel& model, std::vector<State> design, Vector offset,
                               Matrix basis);

  bool is_tabular() const noexcept { return tabular_; }
  const std::vector<State>& design_states() const noexcept { return design_; }
  /// Positions of the design states inside model.transient().
  const std::vector<std::size_t>& design_slots() const noexcept { return slots_; }
  const Vector& offset() const noexcept { return offset_; }
  const Matrix& basis() const noexcept { return basis_; }
  /// Rows of basis() at the design states (d x p).
  const Matrix& design_matrix() const noexcept { return design_matrix_; }

 private:
  BasisModel() = default;

  bool tabular_ = false;
  std::vector<State> design_;
  std::vector<std::size_t> slots_;
  Vector offset_;
  Matrix basis_;
  Matrix design_matrix_;
};

struct ClampBounds {
  double floor = 0.0;
  double ceiling = 0.0;

  bool operator==(const ClampBounds&) const = default;
};

/// [0.5 * min(mu), 2 * max(mu)].
ClampBounds default_clamp(const ValueFunction& mu);

/// Least-squares fit of (ybar - b0 at D) on the design matrix, evaluated on
/// every transient state and clamped pointwise into [floor, ceiling]. The
/// tabular model clamps ybar directly.
ValueFunction fit_values(const Vector& ybar, const BasisModel& basis, ClampBounds clamp);

struct AdaptiveConfig {
  std::size_t replications = 1000;
  std::size_t iterations = 20;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // 0: derived from the structural constants
  std::optional<ClampBounds> clamp;  // default_clamp(mu) when empty
  double stop_error = 1e-12;
};

struct IterationStats {
  double max_sample_var = 0.0;  // max over D of sample variance / R
  std::size_t censored = 0;
  bool flagged = false;         // every path censored; previous iterate kept
  double wall_ms = 0.0;
};

struct AdaptiveTrace {
  std::vector<ValueFunction> iterates;  // mu^(0) .. mu^(N)
  std::vector<double> sup_errors;       // |mu^(n) - mu|_sup, one per iterate
  std::vector<IterationStats> stats;    // one per completed update (N entries)
  std::optional<double> theta_hat;
  AdaptiveConfig config;
  ClampBounds clamp;
  bool tabular = true;
  std::size_t max_steps = 0;

  std::size_t censored_total() const;
};

/// The adaptive loop: simulate R replications under the kernel tilted by the
/// current iterate from every design state, fit, clamp, repeat. Stops after
/// config.iterations updates or once the sup error falls to config.stop_error.
/// Replication streams are derived from (seed, iteration, state, replication).
AdaptiveTrace run_adaptive(const MarkovRewardModel& model, const BasisModel& basis, const ValueFunction& init,
                           const AdaptiveConfig& config);

/// exp(-slope) of the least-squares line through log(error) vs. iteration,
/// over the window starting at burn_in and ending before the first error
/// <= 1e-14. Throws NumericalError when the window has fewer than 4 points.
double estimate_rate(std::span<const double> errors, std::size_t burn_in);
double estimate_rate(AdaptiveTrace& trace, std::size_t burn_in);

struct ContractionResult {
  double ratio = 0.0;  // Monte Carlo E|mu^(1) - mu|^2 / |nu - mu|^2 (sup norms)
  double bound = 0.0;  // exact-variance upper bound for the same ratio
};

/// Runs `trials` independent one-step updates from nu and measures the
/// squared-error contraction.
ContractionResult contraction_diagnostic(const MarkovRewardModel& model, const BasisModel& basis,
                                         const ValueFunction& nu, std::size_t replications, std::size_t trials,
                                         std::uint64_t seed, std::optional<ClampBounds> clamp = std::nullopt,
                                         std::size_t max_steps = 0);

/// Fraction of iterations n with |mu^(n+2) - mu| < eps.
double two_step_hit_frequency(const AdaptiveTrace& trace, double eps);

/// Columns iter,sup_error,max_sample_var,censored_total,wall_ms. wall_ms is
/// written as 0 unless `with_timing`, keeping the file reproducible.
void write_trace_csv(std::ostream& out, const AdaptiveTrace& trace, bool with_timing = false);

}  // namespace adaptis
