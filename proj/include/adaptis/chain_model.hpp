#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace adaptis {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using State = std::size_t;

/// Finite Markov chain with an absorbing set K, per-transition rewards s(x,y)
/// and per-transition discount factors beta(x,y). The quantity of interest is
///
///   Y = sum_{i=1}^{tau} s(X_{i-1}, X_i) * prod_{j<=i} beta(X_{j-1}, X_j),
///
/// where tau is the first entry time into K.
///
/// Construction only checks shapes; value-level conventions are reported by
/// validate_model() so callers can list every problem at once.
class MarkovRewardModel {
 public:
  MarkovRewardModel(Matrix transition, Matrix reward, Matrix discount, std::vector<State> absorbing);

  std::size_t n_states() const noexcept { return static_cast<std::size_t>(transition_.rows()); }
  const Matrix& transition() const noexcept { return transition_; }
  const Matrix& reward() const noexcept { return reward_; }
  const Matrix& discount() const noexcept { return discount_; }

  /// Sorted, duplicate-free absorbing states.
  const std::vector<State>& absorbing() const noexcept { return absorbing_; }
  /// Sorted transient states; ValueFunction entries follow this order.
  const std::vector<State>& transient() const noexcept { return transient_; }
  std::size_t n_transient() const noexcept { return transient_.size(); }

  bool is_absorbing(State x) const { return slot_.at(x) < 0; }
  /// Position of x inside transient(), or nullopt for absorbing states.
  std::optional<std::size_t> transient_index(State x) const;

 private:
  Matrix transition_;
  Matrix reward_;
  Matrix discount_;
  std::vector<State> absorbing_;
  std::vector<State> transient_;
  std::vector<std::ptrdiff_t> slot_;
};

/// A positive function on the transient states (implicitly zero on K).
/// Used for the exact value, tilting functions and the adaptive iterates.
struct ValueFunction {
  Vector values;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
  double operator[](std::size_t i) const { return values(static_cast<Eigen::Index>(i)); }
  double min() const { return values.minCoeff(); }
  double max() const { return values.maxCoeff(); }
};

/// Sup-norm distance over the transient states.
double sup_distance(const ValueFunction& a, const ValueFunction& b);

/// Full-length vector over S with zeros on K.
Vector extend_to_states(const MarkovRewardModel& model, const ValueFunction& f);

struct Violation {
  std::string path;  // JSON pointer into the model document, e.g. "/P/1"
  std::string message;
};

/// Every violated model convention: stochastic rows, nonnegative rewards,
/// zero rewards out of K, strictly positive discounts, nonempty transient
/// set, and K reachable from every transient state.
std::vector<Violation> validate_model(const MarkovRewardModel& model);

/// min over transient x of E_x[ s(X_{tau-1}, X_tau) ; tau <= horizon ],
/// by backward recursion over `horizon` steps. Throws DomainError for horizon 0.
double absorption_reward_within(const MarkovRewardModel& model, std::size_t horizon);

/// Bounds used by the likelihood-ratio and absorption-time estimates.
struct StructuralConstants {
  double reward_sup = 0;     // sup of s over A x S
  double discount_sup = 0;   // sup of beta over A x S
  double discount_inf = 0;   // inf of beta over A x S
  double mu_min = 0;         // inf of the exact value over A
  double mu_max = 0;         // sup of the exact value over A
  std::size_t horizon = 0;   // smallest m with absorption_reward_within(m) > 0
  double gamma = 0;          // absorption_reward_within(horizon)
  double nu_min = 0;         // box bounds on admissible tilting functions
  double nu_max = 0;
  double kappa = 0;          // per-step lower rate: L_n^{-1} >= kappa^n (times terminal reward)
  double growth = 0;         // per-step upper rate: L_n^{-1} <= growth^n
  double geometric_rate = 0; // absorption time dominated by Geometric(geometric_rate)
};

/// Default search cap for the absorption horizon.
inline std::size_t default_horizon_cap(const MarkovRewardModel& model) { return 10 * model.n_states(); }

/// Computes the constants for tilting functions in the box [nu_min, nu_max].
/// `mu` must be the exact value function. Throws DomainError when the box
/// does not contain mu or nu_min <= 0, and NumericalError when no horizon up
/// to `horizon_cap` gives a positive absorption reward.
StructuralConstants compute_constants(const MarkovRewardModel& model, const ValueFunction& mu, double nu_min,
                                      double nu_max, std::size_t horizon_cap);

}  // namespace adaptis
