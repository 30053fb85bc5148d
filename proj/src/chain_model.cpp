#include "adaptis/chain_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "adaptis/errors.hpp"

namespace adaptis {

namespace {

constexpr double kRowSumTolerance = 1e-12;

std::string at(const char* field, Eigen::Index i) { return fmt::format("/{}/{}", field, i); }
std::string at(const char* field, Eigen::Index i, Eigen::Index j) { return fmt::format("/{}/{}/{}", field, i, j); }

}  // namespace

MarkovRewardModel::MarkovRewardModel(Matrix transition, Matrix reward, Matrix discount, std::vector<State> absorbing)
    : transition_(std::move(transition)),
      reward_(std::move(reward)),
      discount_(std::move(discount)),
      absorbing_(std::move(absorbing)) {
  const auto n = transition_.rows();
  if (n == 0 || transition_.cols() != n) throw DomainError("transition matrix must be square and nonempty");
  if (reward_.rows() != n || reward_.cols() != n) throw DomainError("reward matrix shape differs from transition matrix");
  if (discount_.rows() != n || discount_.cols() != n)
    throw DomainError("discount matrix shape differs from transition matrix");

  std::sort(absorbing_.begin(), absorbing_.end());
  absorbing_.erase(std::unique(absorbing_.begin(), absorbing_.end()), absorbing_.end());
  slot_.assign(static_cast<std::size_t>(n), 0);
  for (State k : absorbing_) {
    if (k >= static_cast<State>(n)) throw DomainError(fmt::format("absorbing state {} out of range", k));
    slot_[k] = -1;
  }
  for (State x = 0; x < static_cast<State>(n); ++x) {
    if (slot_[x] < 0) continue;
    slot_[x] = static_cast<std::ptrdiff_t>(transient_.size());
    transient_.push_back(x);
  }
}

std::optional<std::size_t> MarkovRewardModel::transient_index(State x) const {
  const auto slot = slot_.at(x);
  if (slot < 0) return std::nullopt;
  return static_cast<std::size_t>(slot);
}

double sup_distance(const ValueFunction& a, const ValueFunction& b) {
  if (a.size() != b.size()) throw DomainError("value functions differ in length");
  if (a.size() == 0) return 0.0;
  return (a.values - b.values).cwiseAbs().maxCoeff();
}

Vector extend_to_states(const MarkovRewardModel& model, const ValueFunction& f) {
  if (f.size() != model.n_transient()) throw DomainError("value function length differs from transient count");
  Vector full = Vector::Zero(static_cast<Eigen::Index>(model.n_states()));
  for (std::size_t i = 0; i < model.n_transient(); ++i)
    full(static_cast<Eigen::Index>(model.transient()[i])) = f[i];
  return full;
}

std::vector<Violation> validate_model(const MarkovRewardModel& model) {
  std::vector<Violation> out;
  const auto& P = model.transition();
  const auto& s = model.reward();
  const auto& beta = model.discount();
  const auto n = P.rows();

  for (Eigen::Index i = 0; i < n; ++i) {
    const bool absorbing = model.is_absorbing(static_cast<State>(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = P(i, j);
      if (!std::isfinite(p) || p < 0.0 || p > 1.0)
        out.push_back({at("P", i, j), fmt::format("probability {} outside [0,1]", p)});
      if (!std::isfinite(s(i, j)) || s(i, j) < 0.0)
        out.push_back({at("s", i, j), fmt::format("reward {} is negative or not finite", s(i, j))});
      else if (absorbing && s(i, j) != 0.0)
        out.push_back({at("s", i, j), "reward on an absorbing row must be 0"});
      if (!std::isfinite(beta(i, j)) || beta(i, j) <= 0.0)
        out.push_back({at("beta", i, j), fmt::format("beta not strictly positive ({})", beta(i, j))});
    }
    const double row = P.row(i).sum();
    if (std::abs(row - 1.0) > kRowSumTolerance)
      out.push_back({at("P", i), fmt::format("row not stochastic (sums to {:.17g})", row)});
  }

  if (model.transient().empty()) {
    out.push_back({"/absorbing", "no transient states"});
    return out;
  }

  // Backward reachability from K along positive-probability edges.
  std::vector<char> reaches(static_cast<std::size_t>(n), 0);
  for (State k : model.absorbing()) reaches[k] = 1;
  for (bool changed = true; changed;) {
    changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (reaches[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (P(i, j) > 0.0 && reaches[static_cast<std::size_t>(j)]) {
          reaches[static_cast<std::size_t>(i)] = 1;
          changed = true;
          break;
        }
      }
    }
  }
  for (State x : model.transient())
    if (!reaches[x]) out.push_back({"/P", fmt::format("absorbing set unreachable from state {}", x)});
  return out;
}

double absorption_reward_within(const MarkovRewardModel& model, std::size_t horizon) {
  if (horizon == 0) throw DomainError("horizon must be at least 1");
  const auto& P = model.transition();
  const auto& s = model.reward();
  const auto& A = model.transient();
  const auto na = static_cast<Eigen::Index>(A.size());
  if (na == 0) return 0.0;

  // immediate(x) = E_x[s(x, X_1); X_1 in K]; inner(x, y) = P(x, y) on A x A.
  Vector immediate = Vector::Zero(na);
  Matrix inner(na, na);
  for (Eigen::Index a = 0; a < na; ++a) {
    const auto x = static_cast<Eigen::Index>(A[static_cast<std::size_t>(a)]);
    for (State k : model.absorbing()) {
      const auto y = static_cast<Eigen::Index>(k);
      immediate(a) += P(x, y) * s(x, y);
    }
    for (Eigen::Index b = 0; b < na; ++b) inner(a, b) = P(x, static_cast<Eigen::Index>(A[static_cast<std::size_t>(b)]));
  }

  Vector value = immediate;
  for (std::size_t step = 1; step < horizon; ++step) value = immediate + inner * value;
  return value.minCoeff();
}

StructuralConstants compute_constants(const MarkovRewardModel& model, const ValueFunction& mu, double nu_min,
                                      double nu_max, std::size_t horizon_cap) {
  if (mu.size() != model.n_transient() || mu.size() == 0)
    throw DomainError("exact value function length differs from transient count");
  StructuralConstants c;
  c.mu_min = mu.min();
  c.mu_max = mu.max();
  if (!(nu_min > 0.0)) throw DomainError("nu_min must be positive");
  if (nu_min > c.mu_min || nu_max < c.mu_max)
    throw DomainError(fmt::format("box [{}, {}] does not contain the exact value range [{}, {}]", nu_min, nu_max,
                                  c.mu_min, c.mu_max));
  c.nu_min = nu_min;
  c.nu_max = nu_max;

  const auto& s = model.reward();
  const auto& beta = model.discount();
  c.reward_sup = 0.0;
  c.discount_sup = 0.0;
  c.discount_inf = std::numeric_limits<double>::infinity();
  for (State x : model.transient()) {
    const auto i = static_cast<Eigen::Index>(x);
    c.reward_sup = std::max(c.reward_sup, s.row(i).maxCoeff());
    c.discount_sup = std::max(c.discount_sup, beta.row(i).maxCoeff());
    c.discount_inf = std::min(c.discount_inf, beta.row(i).minCoeff());
  }

  for (std::size_t m = 1; m <= horizon_cap; ++m) {
    const double g = absorption_reward_within(model, m);
    if (g > 0.0) {
      c.horizon = m;
      c.gamma = g;
      break;
    }
  }
  if (c.horizon == 0)
    throw NumericalError(fmt::format("no horizon up to {} has positive absorption reward", horizon_cap));

  const double step_scale = (c.reward_sup + c.nu_max) * c.discount_sup;
  c.kappa = std::min(1.0 - 1e-12, c.discount_inf * std::min(c.nu_min, 1.0) / step_scale);
  c.growth = std::max(1.0, step_scale * c.mu_max / (c.nu_min * c.mu_min));
  const double m = static_cast<double>(c.horizon);
  c.geometric_rate = 1.0 - std::pow(1.0 - std::pow(c.kappa, m) * c.gamma, 1.0 / m);
  return c;
}

}  // namespace adaptis
