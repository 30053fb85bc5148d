#include "adaptis/models.hpp"

#include <numeric>

#include "adaptis/errors.hpp"

namespace adaptis {

MarkovRewardModel two_state_model() {
  Matrix p{{1.0, 0.0, 0.0}, {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}};
  Matrix s{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
  return MarkovRewardModel(std::move(p), std::move(s), Matrix::Ones(3, 3), {0});
}

EigenModel two_by_two_eigen_model() { return EigenModel(Matrix{{0.3, 0.4}, {0.5, 0.2}}); }

MarkovRewardModel random_model(const RandomModelOptions& o, Xoshiro256& rng) {
  if (o.n_transient == 0 || o.n_absorbing == 0) throw DomainError("random_model: need transient and absorbing states");
  if (!(o.exit_floor > 0.0 && o.exit_floor <= 1.0)) throw DomainError("random_model: exit_floor must lie in (0, 1]");
  const std::size_t nt = o.n_transient;
  const std::size_t n = nt + o.n_absorbing;
  auto between = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

  Matrix p = Matrix::Zero(n, n);
  Matrix s = Matrix::Zero(n, n);
  Matrix beta = Matrix::Ones(n, n);
  for (std::size_t x = 0; x < nt; ++x) {
    std::vector<double> w(n);
    for (std::size_t y = 0; y < n; ++y) {
      const bool dropped = y < nt && rng.uniform() < o.sparsity;
      w[y] = dropped ? 0.0 : between(0.05, 1.0);
    }
    const double to_transient = std::accumulate(w.begin(), w.begin() + nt, 0.0);
    const double to_absorbing = std::accumulate(w.begin() + nt, w.end(), 0.0);
    const double exit = std::max(o.exit_floor, to_absorbing / (to_transient + to_absorbing));
    for (std::size_t y = 0; y < n; ++y) {
      p(x, y) = y < nt ? (to_transient > 0 ? (1.0 - exit) * w[y] / to_transient : 0.0) : exit * w[y] / to_absorbing;
      s(x, y) = between(o.reward_lo, o.reward_hi);
      beta(x, y) = between(o.discount_lo, o.discount_hi);
    }
    if (to_transient == 0) {
      for (std::size_t y = nt; y < n; ++y) p(x, y) = w[y] / to_absorbing;
    }
  }
  std::vector<State> absorbing(o.n_absorbing);
  for (std::size_t a = 0; a < o.n_absorbing; ++a) {
    absorbing[a] = nt + a;
    p(nt + a, nt + a) = 1.0;
  }
  return MarkovRewardModel(std::move(p), std::move(s), std::move(beta), std::move(absorbing));
}

ValueFunction random_tilting(std::size_t n_transient, double lo, double hi, Xoshiro256& rng) {
  Vector v(static_cast<Eigen::Index>(n_transient));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return ValueFunction{std::move(v)};
}

}  // namespace adaptis
