#include "adaptis/eigenvalue.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "adaptis/errors.hpp"
#include "adaptis/exact_solver.hpp"
#include "adaptis/parallel.hpp"
#include "adaptis/rng.hpp"

namespace adaptis {

namespace {

constexpr std::size_t kOracleMaxIterations = 100'000;

bool irreducible(const Matrix& P) {
  const auto n = P.rows();
  // reach(i, j): a path of length >= 1 from i to j.
  std::vector<std::vector<char>> reach(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = P(i, j) > 0.0;
  for (std::size_t k = 0; k < reach.size(); ++k)
    for (std::size_t i = 0; i < reach.size(); ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < reach.size(); ++j)
          if (reach[k][j]) reach[i][j] = 1;
  for (const auto& row : reach)
    for (char c : row)
      if (!c) return false;
  return true;
}

double log_mean_weight(std::span<const RegenerationSample> samples, double alpha) {
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& s : samples) peak = std::max(peak, alpha * static_cast<double>(s.tau) + s.log_L);
  double acc = 0.0;
  for (const auto& s : samples) acc += std::exp(alpha * static_cast<double>(s.tau) + s.log_L - peak);
  return peak + std::log(acc / static_cast<double>(samples.size()));
}

}  // namespace

EigenModel::EigenModel(Matrix transition) : transition_(std::move(transition)) {
  if (transition_.rows() == 0 || transition_.rows() != transition_.cols())
    throw DomainError("eigen model matrix must be square and nonempty");
}

Matrix EigenModel::without_return_state() const {
  const auto d = static_cast<Eigen::Index>(this->d());
  return transition_.bottomRightCorner(d, d);
}

std::vector<Violation> validate_eigen_model(const EigenModel& model) {
  std::vector<Violation> out;
  const auto& P = model.transition();
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j)
      if (!std::isfinite(P(i, j)) || P(i, j) < 0.0)
        out.push_back({fmt::format("/P/{}/{}", i, j), fmt::format("entry {} is negative or not finite", P(i, j))});
    const double row = P.row(i).sum();
    if (row > 1.0 + 1e-12) out.push_back({fmt::format("/P/{}", i), fmt::format("row sum {:.17g} exceeds 1", row)});
  }
  if (!out.empty()) return out;
  if (!irreducible(P)) {
    out.push_back({"/P", "matrix is reducible"});
    return out;
  }
  const double full = spectral_radius(P);
  const double reduced = spectral_radius(model.without_return_state());
  if (!(reduced < full - 1e-12))
    out.push_back({"/P", fmt::format("spectral radius without state 0 ({}) is not below that of P ({})", reduced, full)});
  return out;
}

PerronFrobenius eigen_oracle(const EigenModel& model, double tol) {
  const auto& P = model.transition();
  if (!irreducible(P)) throw DomainError("eigen_oracle: matrix is reducible");
  const auto n = P.rows();
  PerronFrobenius pf;
  Vector x = Vector::Ones(n);
  for (std::size_t it = 1; it <= kOracleMaxIterations; ++it) {
    const Vector Px = P * x;
    const double lambda = Px(0) / x(0);
    const double residual = (Px / lambda - x).lpNorm<Eigen::Infinity>();
    if (residual <= tol) {
      pf.eigenvalue = lambda;
      pf.exponent = -std::log(lambda);
      pf.vector = x;
      pf.residual = residual;
      pf.iterations = it;
      return pf;
    }
    const Vector z = Px + x;
    x = z / z(0);
  }
  throw NumericalError(fmt::format("eigen_oracle: no convergence in {} iterations", kOracleMaxIterations));
}

MarkovRewardModel regeneration_model(const EigenModel& model, double alpha) {
  const auto d = static_cast<Eigen::Index>(model.d());
  const auto& P = model.transition();
  const Eigen::Index cemetery = d + 1;
  const Eigen::Index origin = d + 2;
  const Eigen::Index n = d + 3;

  Matrix T = Matrix::Zero(n, n);
  Matrix s = Matrix::Zero(n, n);
  T(0, 0) = 1.0;
  T(cemetery, cemetery) = 1.0;
  auto copy_row = [&](Eigen::Index from, Eigen::Index to) {
    double sum = 0.0;
    for (Eigen::Index y = 0; y <= d; ++y) {
      T(to, y) = P(from, y);
      sum += P(from, y);
    }
    T(to, cemetery) = std::max(0.0, 1.0 - sum);
    s(to, 0) = 1.0;
  };
  for (Eigen::Index x = 1; x <= d; ++x) copy_row(x, x);
  copy_row(0, origin);
  return MarkovRewardModel(std::move(T), std::move(s), Matrix::Constant(n, n, std::exp(alpha)),
                           {0, static_cast<State>(cemetery)});
}

ValueFunction extend_eigen_tilting(const Vector& nu) {
  Vector ext(nu.size() + 1);
  ext.head(nu.size()) = nu;
  ext(nu.size()) = 1.0;
  return {ext};
}

TiltedModel build_eigen_tilted(const EigenModel& model, const Vector& nu, double alpha) {
  if (nu.size() != static_cast<Eigen::Index>(model.d())) throw DomainError("tilting length must equal d");
  return build_tilted(regeneration_model(model, alpha), extend_eigen_tilting(nu));
}

RegenerationBatch simulate_regeneration(const TiltedModel& tilted, State start, std::size_t replications,
                                        std::uint64_t seed, std::size_t max_steps) {
  if (replications == 0) throw DomainError("at least one replication is required");
  std::vector<Trajectory> paths(replications);
  parallel_for(replications, [&](std::size_t i) {
    Xoshiro256 rng = make_stream(seed, {static_cast<std::uint64_t>(start), static_cast<std::uint64_t>(i)});
    paths[i] = simulate_path(tilted, start, rng, max_steps, false);
  });
  RegenerationBatch batch;
  batch.samples.reserve(replications);
  for (const auto& p : paths) {
    if (p.censored) {
      ++batch.censored;
      continue;
    }
    if (p.terminal_reward != 1.0) throw std::logic_error("regeneration path absorbed in the cemetery");
    batch.samples.push_back({*p.tau, p.log_L_final});
  }
  return batch;
}

double mean_cycle_weight(std::span<const RegenerationSample> samples, double alpha) {
  if (samples.empty()) throw DomainError("empty regeneration sample");
  return std::exp(log_mean_weight(samples, alpha));
}

ExponentRoot solve_exponent(std::span<const RegenerationSample> samples, double alpha_max) {
  if (samples.empty()) throw DomainError("solve_exponent: empty sample");
  for (const auto& s : samples)
    if (s.tau == 0) throw DomainError("solve_exponent: cycle lengths must be at least 1");

  auto f = [&](double a) { return log_mean_weight(samples, a); };
  double lo = -1.0;
  double hi = 1.0;
  while (f(lo) > 0.0) {
    lo *= 2.0;
    if (lo < -1e300) throw NumericalError("solve_exponent: cannot bracket root from below");
  }
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("solve_exponent: cannot bracket root from above");
  }
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  ExponentRoot root;
  const double rlo = std::abs(std::expm1(f(lo)));
  const double rhi = std::abs(std::expm1(f(hi)));
  root.raw = rlo < rhi ? lo : hi;
  root.residual = std::min(rlo, rhi);
  root.value = std::clamp(root.raw, 0.0, alpha_max);
  return root;
}

double default_alpha_max(const EigenModel& model) {
  const double reduced = std::max(spectral_radius(model.without_return_state()), 1e-12);
  return -std::log(reduced) - 1e-3;
}

EigenTrace run_eigen_adaptive(const EigenModel& model, const Vector& init_nu, const EigenConfig& config) {
  if (const auto problems = validate_eigen_model(model); !problems.empty())
    throw DomainError(fmt::format("invalid eigen model: {} {}", problems.front().path, problems.front().message));
  if (config.replications == 0) throw DomainError("R must be at least 1");
  const auto d = static_cast<Eigen::Index>(model.d());
  if (init_nu.size() != d) throw DomainError("initial tilting length must equal d");
  if (d > 0 && !(init_nu.minCoeff() > 0.0)) throw DomainError("initial tilting must be strictly positive");

  EigenTrace trace;
  trace.oracle = eigen_oracle(model);
  trace.alpha_max = config.alpha_max.value_or(default_alpha_max(model));
  if (!(trace.alpha_max > trace.oracle.exponent))
    throw DomainError(fmt::format("alpha_max {} must exceed the root {}", trace.alpha_max, trace.oracle.exponent));
  const Vector target = trace.oracle.vector.tail(d);
  trace.clamp = config.clamp.value_or(d > 0 ? ClampBounds{0.5 * target.minCoeff(), 2.0 * target.maxCoeff()}
                                            : ClampBounds{0.5, 2.0});

  const State origin = cycle_start(model);
  const double R = static_cast<double>(config.replications);
  trace.iterates.push_back(init_nu);
  for (std::size_t n = 0; n < config.iterations; ++n) {
    const Vector& nu = trace.iterates.back();
    const std::uint64_t stream_seed = derive_seed(config.seed, {static_cast<std::uint64_t>(n)});
    const TiltedModel tilted = build_eigen_tilted(model, nu);

    EigenIteration rec;
    const RegenerationBatch cycles = simulate_regeneration(tilted, origin, config.replications, stream_seed, config.max_steps);
    rec.censored += cycles.censored;
    if (cycles.samples.empty()) throw NumericalError("every regeneration cycle was censored");
    const ExponentRoot root = solve_exponent(cycles.samples, trace.alpha_max);
    rec.alpha_hat = root.value;
    rec.alpha_raw = root.raw;
    rec.alpha_err = std::abs(root.value - trace.oracle.exponent);
    rec.nu_sup_err = d > 0 ? (nu - target).cwiseAbs().maxCoeff() : 0.0;

    Vector next(d);
    double bias = 0.0;
    for (Eigen::Index x = 1; x <= d; ++x) {
      const RegenerationBatch paths =
          simulate_regeneration(tilted, static_cast<State>(x), config.replications, stream_seed, config.max_steps);
      rec.censored += paths.censored;
      // Censored paths never reached 0 and contribute zero reward.
      const double estimate = paths.samples.empty()
                                  ? 0.0
                                  : mean_cycle_weight(paths.samples, root.value) *
                                        static_cast<double>(paths.samples.size()) / R;
      bias += estimate - target(x - 1);
      next(x - 1) = std::clamp(estimate, trace.clamp.floor, trace.clamp.ceiling);
    }
    rec.value_bias = d > 0 ? bias / static_cast<double>(d) : 0.0;
    trace.records.push_back(rec);
    trace.iterates.push_back(std::move(next));
  }
  return trace;
}

void write_eigen_trace_csv(std::ostream& out, const EigenTrace& trace) {
  out << "iter,alpha_hat,alpha_err,nu_sup_err,censored\n";
  for (std::size_t n = 0; n < trace.records.size(); ++n) {
    const auto& r = trace.records[n];
    fmt::print(out, "{},{:.17g},{:.17g},{:.17g},{}\n", n, r.alpha_hat, r.alpha_err, r.nu_sup_err, r.censored);
  }
}

}  // namespace adaptis
