#pragma once

#include <cstdint>
#include <span>

#include "oplab/mdp.hpp"
#include "oplab/rng.hpp"

namespace oplab {

double draw_reward(const RewardModel& reward, Rng& rng);
StateId draw_successor(std::span<const Successor> row, Rng& rng);

// N i.i.d. tuples (s, a, r, s') per level with (s, a) ~ mu_h. Level h draws
// from the stream keyed by (seed, h, trial), so the result depends only on
// those three numbers.
OfflineDataset sample_offline(const LayeredMdp& mdp, const DataDistribution& mu, std::int64_t n, std::uint64_t seed,
                              std::uint64_t trial = 0);

// Return of one episode from s_1 under pi.
double rollout_return(const LayeredMdp& mdp, const Policy& pi, Rng& rng);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::int64_t episodes = 0;
};
MonteCarloEstimate monte_carlo_value(const LayeredMdp& mdp, const Policy& pi, std::int64_t episodes,
                                     std::uint64_t seed);

}  // namespace oplab
