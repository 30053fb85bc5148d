#pragma once

#include "adaptis/chain_model.hpp"
#include "adaptis/eigenvalue.hpp"
#include "adaptis/rng.hpp"

namespace adaptis {

/// Three states, 0 absorbing; 1 and 2 each move to 0 or to the other with
/// probability 1/2. Reward 1 on every transition out of 1 and 2, discount 1.
/// The value is 2 at both transient states.
MarkovRewardModel two_state_model();

/// 2x2 eigen model [[0.3, 0.4], [0.5, 0.2]] with Perron root 0.7.
EigenModel two_by_two_eigen_model();

struct RandomModelOptions {
  std::size_t n_transient = 5;
  std::size_t n_absorbing = 1;
  double exit_floor = 0.1;                   // minimum mass from each transient row into the absorbing set
  double reward_lo = 0.1, reward_hi = 1.0;   // rewards on transient rows
  double discount_lo = 0.5, discount_hi = 1.0;
  double sparsity = 0.0;                     // chance a transient-to-transient edge is removed
};

/// Random valid model: transient states first, then absorbing ones. Every
/// transient row sends at least exit_floor into the absorbing set, so the
/// discounted transient block has spectral radius at most 1 - exit_floor.
MarkovRewardModel random_model(const RandomModelOptions& options, Xoshiro256& rng);

/// Uniform draw from the box [lo, hi] on the transient states.
ValueFunction random_tilting(std::size_t n_transient, double lo, double hi, Xoshiro256& rng);

}  // namespace adaptis
