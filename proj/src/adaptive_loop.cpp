#include "adaptis/adaptive_loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "adaptis/errors.hpp"
#include "adaptis/exact_solver.hpp"
#include "adaptis/importance_sampling.hpp"
#include "adaptis/rng.hpp"

namespace adaptis {

namespace {

constexpr double kRateFloor = 1e-14;
constexpr std::size_t kMaxStepsCap = 10'000'000;

std::size_t resolve_max_steps(const MarkovRewardModel& model, const ValueFunction& mu, ClampBounds clamp,
                              std::size_t requested) {
  if (requested != 0) return requested;
  const double lo = std::min(clamp.floor, mu.min());
  const double hi = std::max(clamp.ceiling, mu.max());
  const auto constants = compute_constants(model, mu, lo, hi, default_horizon_cap(model));
  return std::min(kMaxStepsCap, default_max_steps(constants));
}

struct UpdateOutcome {
  ValueFunction next;
  IterationStats stats;
  Vector variances;  // per design state
};

UpdateOutcome one_update(const MarkovRewardModel& model, const BasisModel& basis, const ValueFunction& current,
                         std::size_t replications, std::uint64_t stream_seed, std::size_t max_steps,
                         ClampBounds clamp) {
  const TiltedModel tilted = build_tilted(model, current);
  const auto& design = basis.design_states();
  Vector ybar(static_cast<Eigen::Index>(design.size()));
  UpdateOutcome out;
  out.variances = Vector::Zero(ybar.size());
  for (std::size_t i = 0; i < design.size(); ++i) {
    const ValueEstimate est = estimate_value(tilted, design[i], replications, stream_seed, max_steps);
    ybar(static_cast<Eigen::Index>(i)) = est.mean;
    out.variances(static_cast<Eigen::Index>(i)) = est.sample_variance;
    out.stats.max_sample_var =
        std::max(out.stats.max_sample_var, est.sample_variance / static_cast<double>(replications));
    out.stats.censored += est.censored_count;
  }
  if (out.stats.censored == replications * design.size()) {
    out.stats.flagged = true;
    out.next = current;
  } else {
    out.next = fit_values(ybar, basis, clamp);
  }
  return out;
}

}  // namespace

BasisModel BasisModel::tabular(const MarkovRewardModel& model) {
  const auto na = static_cast<Eigen::Index>(model.n_transient());
  BasisModel b;
  b.tabular_ = true;
  b.design_ = model.transient();
  b.slots_.resize(model.n_transient());
  for (std::size_t i = 0; i < b.slots_.size(); ++i) b.slots_[i] = i;
  b.offset_ = Vector::Zero(na);
  b.basis_ = Matrix::Identity(na, na);
  b.design_matrix_ = b.basis_;
  return b;
}

BasisModel BasisModel::regression(const MarkovRewardModel& model, std::vector<State> design, Vector offset,
                                  Matrix basis) {
  const auto na = static_cast<Eigen::Index>(model.n_transient());
  if (offset.size() != na) throw DomainError("basis offset length differs from transient count");
  if (basis.rows() != na || basis.cols() == 0) throw DomainError("basis matrix must be n_transient x p with p >= 1");
  if (design.empty()) throw DomainError("design set is empty");

  BasisModel b;
  b.design_ = std::move(design);
  for (State x : b.design_) {
    const auto slot = model.transient_index(x);
    if (!slot) throw DomainError(fmt::format("design state {} is not transient", x));
    if (std::find(b.slots_.begin(), b.slots_.end(), *slot) != b.slots_.end())
      throw DomainError(fmt::format("design state {} listed twice", x));
    b.slots_.push_back(*slot);
  }
  b.offset_ = std::move(offset);
  b.basis_ = std::move(basis);
  b.design_matrix_.resize(static_cast<Eigen::Index>(b.slots_.size()), b.basis_.cols());
  for (std::size_t i = 0; i < b.slots_.size(); ++i)
    b.design_matrix_.row(static_cast<Eigen::Index>(i)) = b.basis_.row(static_cast<Eigen::Index>(b.slots_[i]));

  if (b.design_matrix_.rows() < b.design_matrix_.cols())
    throw DomainError("fewer design states than basis functions");
  Eigen::ColPivHouseholderQR<Matrix> qr(b.design_matrix_);
  if (qr.rank() < b.design_matrix_.cols()) throw DomainError("design matrix is rank deficient");
  return b;
}

ClampBounds default_clamp(const ValueFunction& mu) { return {0.5 * mu.min(), 2.0 * mu.max()}; }

ValueFunction fit_values(const Vector& ybar, const BasisModel& basis, ClampBounds clamp) {
  if (!(clamp.floor > 0.0) || clamp.floor > clamp.ceiling)
    throw DomainError(fmt::format("invalid clamp bounds [{}, {}]", clamp.floor, clamp.ceiling));
  if (ybar.size() != static_cast<Eigen::Index>(basis.design_states().size()))
    throw DomainError("estimate vector length differs from design size");
  if (!ybar.allFinite()) throw DomainError("estimates must be finite");

  Vector fitted;
  if (basis.is_tabular()) {
    fitted = ybar;
  } else {
    Vector target(ybar.size());
    for (Eigen::Index i = 0; i < ybar.size(); ++i)
      target(i) = ybar(i) - basis.offset()(static_cast<Eigen::Index>(basis.design_slots()[static_cast<std::size_t>(i)]));
    Eigen::ColPivHouseholderQR<Matrix> qr(basis.design_matrix());
    if (qr.rank() < basis.design_matrix().cols()) throw NumericalError("design matrix is rank deficient");
    const Vector coef = qr.solve(target);
    fitted = basis.offset() + basis.basis() * coef;
  }
  return {fitted.cwiseMax(clamp.floor).cwiseMin(clamp.ceiling)};
}

std::size_t AdaptiveTrace::censored_total() const {
  std::size_t total = 0;
  for (const auto& s : stats) total += s.censored;
  return total;
}

AdaptiveTrace run_adaptive(const MarkovRewardModel& model, const BasisModel& basis, const ValueFunction& init,
                           const AdaptiveConfig& config) {
  if (config.replications == 0) throw DomainError("R must be at least 1");
  if (init.size() != model.n_transient()) throw DomainError("initial iterate length differs from transient count");
  if (init.size() == 0 || !(init.min() > 0.0)) throw DomainError("initial iterate must be strictly positive");

  const ValueFunction mu = solve_value(model).value;
  AdaptiveTrace trace;
  trace.config = config;
  trace.tabular = basis.is_tabular();
  trace.clamp = config.clamp.value_or(default_clamp(mu));
  trace.max_steps = resolve_max_steps(model, mu, trace.clamp, config.max_steps);

  trace.iterates.push_back(init);
  trace.sup_errors.push_back(sup_distance(init, mu));
  for (std::size_t n = 0; n < config.iterations; ++n) {
    if (trace.sup_errors.back() <= config.stop_error) break;
    const auto start = std::chrono::steady_clock::now();
    UpdateOutcome step = one_update(model, basis, trace.iterates.back(), config.replications,
                                    derive_seed(config.seed, {static_cast<std::uint64_t>(n)}), trace.max_steps,
                                    trace.clamp);
    step.stats.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    trace.stats.push_back(step.stats);
    trace.sup_errors.push_back(sup_distance(step.next, mu));
    trace.iterates.push_back(std::move(step.next));
  }
  return trace;
}

double estimate_rate(std::span<const double> errors, std::size_t burn_in) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t n = burn_in; n < errors.size(); ++n) {
    if (!(errors[n] > kRateFloor)) break;
    xs.push_back(static_cast<double>(n));
    ys.push_back(std::log(errors[n]));
  }
  if (xs.size() < 4)
    throw NumericalError(fmt::format("rate window has {} points above the error floor; need 4", xs.size()));
  const double k = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return std::exp(-sxy / sxx);
}

double estimate_rate(AdaptiveTrace& trace, std::size_t burn_in) {
  trace.theta_hat = estimate_rate(trace.sup_errors, burn_in);
  return *trace.theta_hat;
}

ContractionResult contraction_diagnostic(const MarkovRewardModel& model, const BasisModel& basis,
                                         const ValueFunction& nu, std::size_t replications, std::size_t trials,
                                         std::uint64_t seed, std::optional<ClampBounds> clamp,
                                         std::size_t max_steps) {
  if (replications == 0 || trials == 0) throw DomainError("replications and trials must be positive");
  const ValueFunction mu = solve_value(model).value;
  const double dist = sup_distance(nu, mu);
  if (dist == 0.0) return {0.0, 0.0};
  const ClampBounds box = clamp.value_or(default_clamp(mu));
  const std::size_t steps = resolve_max_steps(model, mu, box, max_steps);

  double acc = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const UpdateOutcome step =
        one_update(model, basis, nu, replications, derive_seed(seed, {static_cast<std::uint64_t>(t)}), steps, box);
    const double e = sup_distance(step.next, mu);
    acc += e * e;
  }

  // E|fit - mu|^2_sup <= sum_x E(fit(x) - mu(x))^2 = sum_x sum_j H(x,j)^2 Var_j / R,
  // where H maps design estimates to fitted values (identity when tabular).
  // Clamping into a box that contains mu only shrinks errors.
  const ExactMoments exact = exact_moments(model, nu);
  double bound = std::numeric_limits<double>::infinity();
  if (exact.finite_variance) {
    const Vector var = exact.variance().cwiseMax(0.0);
    Matrix hat;
    if (basis.is_tabular()) {
      hat = Matrix::Identity(var.size(), var.size());
    } else {
      const Matrix pinv = basis.design_matrix().completeOrthogonalDecomposition().pseudoInverse();
      hat = basis.basis() * pinv;
    }
    double total = 0.0;
    for (Eigen::Index x = 0; x < hat.rows(); ++x)
      for (Eigen::Index j = 0; j < hat.cols(); ++j)
        total += hat(x, j) * hat(x, j) * var(static_cast<Eigen::Index>(basis.design_slots()[static_cast<std::size_t>(j)]));
    bound = total / static_cast<double>(replications) / (dist * dist);
  }
  return {acc / static_cast<double>(trials) / (dist * dist), bound};
}

double two_step_hit_frequency(const AdaptiveTrace& trace, double eps) {
  if (trace.sup_errors.size() < 3) return 0.0;
  std::size_t hits = 0;
  const std::size_t pairs = trace.sup_errors.size() - 2;
  for (std::size_t n = 0; n < pairs; ++n)
    if (trace.sup_errors[n + 2] < eps) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pairs);
}

void write_trace_csv(std::ostream& out, const AdaptiveTrace& trace, bool with_timing) {
  out << "iter,sup_error,max_sample_var,censored_total,wall_ms\n";
  for (std::size_t n = 0; n < trace.sup_errors.size(); ++n) {
    if (n < trace.stats.size()) {
      const auto& s = trace.stats[n];
      fmt::print(out, "{},{:.17g},{:.17g},{},{:.3f}\n", n, trace.sup_errors[n], s.max_sample_var, s.censored,
                 with_timing ? s.wall_ms : 0.0);
    } else {
      fmt::print(out, "{},{:.17g},,,\n", n, trace.sup_errors[n]);
    }
  }
}

}  // namespace adaptis
