#include "adaptis/importance_sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "adaptis/errors.hpp"
#include "adaptis/parallel.hpp"

namespace adaptis {

TiltedModel build_tilted(const MarkovRewardModel& model, const ValueFunction& nu) {
  if (nu.size() != model.n_transient()) throw DomainError("tilting function length differs from transient count");
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (!(nu[i] > 0.0) || !std::isfinite(nu[i]))
      throw DomainError(fmt::format("tilting function must be strictly positive on transient states (entry {} = {})",
                                    i, nu[i]));
  }

  TiltedModel t(model, nu);
  const auto n = static_cast<Eigen::Index>(model.n_states());
  const auto& P = model.transition();
  const auto& s = model.reward();
  const auto& beta = model.discount();
  const Vector nu_full = extend_to_states(model, nu);
  constexpr double inf = std::numeric_limits<double>::infinity();

  t.normalizer_ = Vector::Zero(static_cast<Eigen::Index>(model.n_transient()));
  t.kernel_ = Matrix::Zero(n, n);
  t.likelihood_ = Matrix::Ones(n, n);
  t.log_likelihood_ = Matrix::Zero(n, n);
  t.log_discount_ = beta.array().log().matrix();

  for (Eigen::Index x = 0; x < n; ++x) {
    const auto slot = model.transient_index(static_cast<State>(x));
    if (!slot) {
      t.kernel_.row(x) = P.row(x);
      continue;
    }
    // Discounts enter relative to the row maximum: a row-constant beta then
    // cancels exactly, so Q and l are bit-identical for any such scaling.
    const double row_scale = beta.row(x).maxCoeff();
    double total = 0.0;
    for (Eigen::Index y = 0; y < n; ++y) total += (s(x, y) + nu_full(y)) * (beta(x, y) / row_scale) * P(x, y);
    if (!(total > 0.0) || !std::isfinite(total))
      throw NumericalError(fmt::format("normalizer of transient state {} is not positive", x));
    t.normalizer_(static_cast<Eigen::Index>(*slot)) = row_scale * total;

    for (Eigen::Index y = 0; y < n; ++y) {
      const double weight = s(x, y) + nu_full(y);
      if (weight > 0.0) {
        const double scaled = weight * (beta(x, y) / row_scale);
        t.kernel_(x, y) = scaled * P(x, y) / total;
        t.likelihood_(x, y) = total / scaled;
        t.log_likelihood_(x, y) = std::log(t.likelihood_(x, y));
      } else {
        t.kernel_(x, y) = 0.0;
        t.likelihood_(x, y) = inf;
        t.log_likelihood_(x, y) = inf;
      }
    }
  }

  t.rows_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index x = 0; x < n; ++x) {
    auto& row = t.rows_[static_cast<std::size_t>(x)];
    double acc = 0.0;
    for (Eigen::Index y = 0; y < n; ++y) {
      if (t.kernel_(x, y) > 0.0) {
        acc += t.kernel_(x, y);
        row.push_back({acc, static_cast<State>(y)});
      }
    }
    if (row.empty()) throw NumericalError(fmt::format("tilted row {} has no mass", x));
    row.back().cumulative = 1.0;
  }
  return t;
}

State TiltedModel::sample_next(State x, double u) const {
  const auto& row = rows_.at(x);
  auto it = std::upper_bound(row.begin(), row.end(), u, [](double v, const Step& s) { return v < s.cumulative; });
  if (it == row.end()) --it;
  return it->target;
}

Trajectory simulate_path(const TiltedModel& tilted, State x0, Xoshiro256& rng, std::size_t max_steps, bool record) {
  const auto& model = tilted.base();
  if (x0 >= model.n_states()) throw DomainError(fmt::format("start state {} out of range", x0));
  if (model.is_absorbing(x0)) throw DomainError(fmt::format("start state {} is absorbing", x0));
  if (max_steps == 0) throw DomainError("max_steps must be at least 1");

  const auto& s = model.reward();
  Trajectory path;
  if (record) {
    path.states.push_back(x0);
    path.log_L.push_back(0.0);
  }

  State x = x0;
  double log_L = 0.0;
  double log_B = 0.0;
  double y = 0.0;
  std::size_t step = 0;
  while (step < max_steps) {
    const State next = tilted.sample_next(x, rng.uniform());
    ++step;
    log_L += tilted.log_likelihood(x, next);
    log_B += tilted.log_discount(x, next);
    const double r = s(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(next));
    if (r > 0.0) y += r * std::exp(log_B + log_L);
    if (record) {
      path.states.push_back(next);
      path.log_L.push_back(log_L);
    }
    if (model.is_absorbing(next)) {
      path.tau = step;
      path.terminal_reward = r;
      break;
    }
    x = next;
  }
  path.steps = step;
  path.censored = !path.tau.has_value();
  path.log_L_final = log_L;
  path.y_value = y;
  return path;
}

ValueEstimate estimate_value(const TiltedModel& tilted, State x0, std::size_t replications, std::uint64_t seed,
                             std::size_t max_steps) {
  if (replications == 0) throw DomainError("at least one replication is required");
  ValueEstimate est;
  est.replications.resize(replications);
  parallel_for(replications, [&](std::size_t i) {
    Xoshiro256 rng = make_stream(seed, {static_cast<std::uint64_t>(x0), static_cast<std::uint64_t>(i)});
    const Trajectory path = simulate_path(tilted, x0, rng, max_steps, false);
    est.replications[i] = {path.y_value, path.steps, path.log_L_final, path.censored};
  });

  double sum = 0.0;
  for (const auto& r : est.replications) {
    sum += r.y_value;
    if (r.censored) ++est.censored_count;
  }
  est.mean = sum / static_cast<double>(replications);
  if (replications == 1) {
    est.insufficient_replications = true;
    return est;
  }
  double ss = 0.0;
  for (const auto& r : est.replications) ss += (r.y_value - est.mean) * (r.y_value - est.mean);
  est.sample_variance = ss / static_cast<double>(replications - 1);
  return est;
}

std::vector<double> tail_survival(const TiltedModel& tilted, State x0, std::size_t replications,
                                  std::uint64_t seed, std::size_t k_max) {
  if (replications < 100) throw DomainError("tail_survival needs at least 100 replications");
  // A path censored after k_max + 1 steps has tau > k_max, which is all we need.
  std::vector<std::size_t> tau(replications);
  parallel_for(replications, [&](std::size_t i) {
    Xoshiro256 rng = make_stream(seed, {static_cast<std::uint64_t>(x0), static_cast<std::uint64_t>(i)});
    const Trajectory path = simulate_path(tilted, x0, rng, k_max + 1, false);
    tau[i] = path.censored ? k_max + 1 : *path.tau;
  });
  std::vector<std::size_t> exceed(k_max + 1, 0);
  for (std::size_t t : tau)
    for (std::size_t k = 0; k < std::min(t, k_max + 1); ++k) ++exceed[k];
  std::vector<double> survival(k_max + 1);
  for (std::size_t k = 0; k <= k_max; ++k)
    survival[k] = static_cast<double>(exceed[k]) / static_cast<double>(replications);
  return survival;
}

double survival_bound(const StructuralConstants& c, std::size_t k) {
  return std::pow(1.0 - c.geometric_rate, static_cast<double>(k / c.horizon));
}

double block_survival_bound(const StructuralConstants& c, std::size_t k) {
  const double block = 1.0 - std::pow(c.kappa, static_cast<double>(c.horizon)) * c.gamma;
  return std::pow(block, static_cast<double>(k / c.horizon));
}

std::size_t default_max_steps(const StructuralConstants& c) {
  // The relative guard keeps an exact quotient such as 50 / 0.1 from rounding up a step.
  return static_cast<std::size_t>(std::ceil(50.0 / c.geometric_rate * (1.0 - 1e-12)));
}

void write_replications_csv(std::ostream& out, State x0, const ValueEstimate& estimate, bool header) {
  if (header) out << "rep_index,x0,tau,y_value,log_L_tau,censored\n";
  for (std::size_t i = 0; i < estimate.replications.size(); ++i) {
    const auto& r = estimate.replications[i];
    fmt::print(out, "{},{},{},{:.17g},{:.17g},{}\n", i, x0, r.steps, r.y_value, r.log_L, r.censored ? 1 : 0);
  }
}

}  // namespace adaptis
