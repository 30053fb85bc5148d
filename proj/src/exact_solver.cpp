#include "adaptis/exact_solver.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "adaptis/errors.hpp"

namespace adaptis {

namespace {

constexpr double kDivergenceThreshold = 1.0 - 1e-9;

Eigen::Index idx(State x) { return static_cast<Eigen::Index>(x); }

Vector solve_checked(const Matrix& system, const Vector& rhs, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector sol = lu.solve(rhs);
  if (!sol.allFinite()) throw NumericalError(fmt::format("{}: singular linear system", what));
  const double residual = (system * sol - rhs).lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  if (residual > 1e-8 * scale) throw NumericalError(fmt::format("{}: linear solve residual {}", what, residual));
  return sol;
}

}  // namespace

double spectral_radius(const Matrix& a, int iterations) {
  const auto n = a.rows();
  if (n == 0) return 0.0;
  const Matrix shifted = a + Matrix::Identity(n, n);
  Vector x = Vector::Ones(n) / static_cast<double>(n);
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector y = shifted * x;
    // x stays positive and 1-normalized, so the 1-norm ratio is the growth factor.
    estimate = y.sum() / x.sum();
    x = y / y.sum();
  }
  return std::max(0.0, estimate - 1.0);
}

Vector expected_step_reward(const MarkovRewardModel& model) {
  const auto& A = model.transient();
  Vector h(static_cast<Eigen::Index>(A.size()));
  for (std::size_t a = 0; a < A.size(); ++a) {
    const auto x = idx(A[a]);
    h(static_cast<Eigen::Index>(a)) =
        (model.discount().row(x).array() * model.reward().row(x).array() * model.transition().row(x).array()).sum();
  }
  return h;
}

Matrix discounted_transient_block(const MarkovRewardModel& model) {
  const auto& A = model.transient();
  const auto na = static_cast<Eigen::Index>(A.size());
  Matrix block(na, na);
  for (Eigen::Index a = 0; a < na; ++a)
    for (Eigen::Index b = 0; b < na; ++b) {
      const auto x = idx(A[static_cast<std::size_t>(a)]);
      const auto y = idx(A[static_cast<std::size_t>(b)]);
      block(a, b) = model.discount()(x, y) * model.transition()(x, y);
    }
  return block;
}

ValueSolution solve_value(const MarkovRewardModel& model) {
  if (model.n_transient() == 0) throw DomainError("model has no transient states");
  const Matrix block = discounted_transient_block(model);
  ValueSolution out;
  out.spectral_radius = spectral_radius(block);
  if (out.spectral_radius >= kDivergenceThreshold)
    throw NumericalError(fmt::format(
        "mu diverges: spectral radius of the discounted transient block is {:.6g}, needs < 1", out.spectral_radius));
  const auto na = block.rows();
  out.value.values = solve_checked(Matrix::Identity(na, na) - block, expected_step_reward(model), "solve_value");
  for (std::size_t a = 0; a < out.value.size(); ++a) {
    if (!(out.value[a] > 0.0))
      out.convention_violations.push_back(
          {"/absorbing", fmt::format("state {} has value {} and should be absorbing", model.transient()[a],
                                     out.value[a])});
  }
  return out;
}

ValueFunction truncated_series_value(const MarkovRewardModel& model, std::size_t terms) {
  const Matrix block = discounted_transient_block(model);
  Vector term = expected_step_reward(model);
  Vector sum = term;
  for (std::size_t n = 1; n <= terms; ++n) {
    term = block * term;
    sum += term;
  }
  return {sum};
}

Vector ExactMoments::variance() const {
  return second_moment.values - mean.values.cwiseProduct(mean.values);
}

ExactMoments exact_moments(const TiltedModel& tilted) {
  const auto& model = tilted.base();
  const auto& A = model.transient();
  const auto na = static_cast<Eigen::Index>(A.size());
  const auto& Q = tilted.kernel();
  const auto& l = tilted.likelihood();
  const auto& s = model.reward();
  const auto& beta = model.discount();

  Matrix first_op = Matrix::Zero(na, na);
  Matrix second_op = Matrix::Zero(na, na);
  Vector first_rhs = Vector::Zero(na);
  Vector second_rhs = Vector::Zero(na);
  // Cross term 2 s a^2 Q m(y) is assembled after m is known.
  Matrix cross = Matrix::Zero(na, na);

  for (Eigen::Index a = 0; a < na; ++a) {
    const auto x = idx(A[static_cast<std::size_t>(a)]);
    for (Eigen::Index y = 0; y < static_cast<Eigen::Index>(model.n_states()); ++y) {
      const double q = Q(x, y);
      if (q <= 0.0) continue;
      const double weight = l(x, y) * beta(x, y);
      first_rhs(a) += q * weight * s(x, y);
      second_rhs(a) += q * weight * weight * s(x, y) * s(x, y);
      if (const auto b = model.transient_index(static_cast<State>(y))) {
        const auto bi = static_cast<Eigen::Index>(*b);
        first_op(a, bi) += q * weight;
        second_op(a, bi) += q * weight * weight;
        cross(a, bi) += 2.0 * q * weight * weight * s(x, y);
      }
    }
  }

  ExactMoments out;
  const Matrix I = Matrix::Identity(na, na);
  out.mean.values = solve_checked(I - first_op, first_rhs, "exact_moments mean");
  out.second_moment_radius = spectral_radius(second_op);
  if (out.second_moment_radius >= kDivergenceThreshold) {
    out.finite_variance = false;
    out.second_moment.values = Vector::Constant(na, std::numeric_limits<double>::infinity());
    return out;
  }
  out.second_moment.values =
      solve_checked(I - second_op, second_rhs + cross * out.mean.values, "exact_moments second moment");
  return out;
}

ExactMoments exact_moments(const MarkovRewardModel& model, const ValueFunction& nu) {
  return exact_moments(build_tilted(model, nu));
}

EnumeratedMoments brute_force_moments(const TiltedModel& tilted, std::size_t horizon, double path_budget) {
  const auto& model = tilted.base();
  const auto n = static_cast<Eigen::Index>(model.n_states());
  const auto& Q = tilted.kernel();
  const auto& s = model.reward();
  const auto& A = model.transient();

  // Count positive-probability paths of length <= horizon before enumerating.
  {
    Vector alive = Vector::Zero(n);
    for (State x : A) alive(idx(x)) = 1.0;
    double total = 0.0;
    for (std::size_t step = 0; step < horizon; ++step) {
      Vector next = Vector::Zero(n);
      for (Eigen::Index x = 0; x < n; ++x) {
        if (alive(x) == 0.0) continue;
        for (Eigen::Index y = 0; y < n; ++y) {
          if (Q(x, y) <= 0.0) continue;
          if (model.is_absorbing(static_cast<State>(y)))
            total += alive(x);
          else
            next(y) += alive(x);
        }
      }
      alive = next;
      total += alive.sum();
      if (total > path_budget)
        throw DomainError(fmt::format("path enumeration to horizon {} exceeds budget {:g}", horizon, path_budget));
    }
  }

  EnumeratedMoments out;
  const auto na = static_cast<Eigen::Index>(A.size());
  out.mean = Vector::Zero(na);
  out.second_moment = Vector::Zero(na);
  out.tail_mass = Vector::Zero(na);

  struct Frame {
    State x;
    std::size_t depth;
    double prob;
    double log_weight;  // log(B_i L_i)
    double partial;     // partial sum of the estimator
  };

  for (Eigen::Index a = 0; a < na; ++a) {
    std::vector<Frame> stack{{A[static_cast<std::size_t>(a)], 0, 1.0, 0.0, 0.0}};
    while (!stack.empty()) {
      const Frame f = stack.back();
      stack.pop_back();
      if (f.depth == horizon) {
        out.tail_mass(a) += f.prob;
        continue;
      }
      const auto x = idx(f.x);
      for (Eigen::Index y = 0; y < n; ++y) {
        const double q = Q(x, y);
        if (q <= 0.0) continue;
        const State ys = static_cast<State>(y);
        const double log_weight = f.log_weight + tilted.log_likelihood(f.x, ys) + tilted.log_discount(f.x, ys);
        const double partial = f.partial + (s(x, y) > 0.0 ? s(x, y) * std::exp(log_weight) : 0.0);
        const double prob = f.prob * q;
        if (model.is_absorbing(ys)) {
          out.mean(a) += prob * partial;
          out.second_moment(a) += prob * partial * partial;
          out.paths += 1.0;
        } else {
          stack.push_back({ys, f.depth + 1, prob, log_weight, partial});
        }
      }
    }
  }
  return out;
}

}  // namespace adaptis
