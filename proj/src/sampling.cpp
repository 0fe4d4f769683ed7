#include "oplab/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace oplab {

namespace {

// Index of the first cumulative weight exceeding u; rounding slack at the top
// of the CDF falls to the last atom.
std::size_t pick(std::span<const double> cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return it == cdf.end() ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace

double draw_reward(const RewardModel& reward, Rng& rng) {
  if (reward.kind() == RewardKind::Deterministic) return reward.parameter();
  return rng.bernoulli(reward.parameter()) ? 1.0 : -1.0;
}

StateId draw_successor(std::span<const Successor> row, Rng& rng) {
  if (row.size() == 1) return row.front().state;
  const double u = rng.uniform();
  double acc = 0.0;
  for (const auto& succ : row) {
    acc += succ.prob;
    if (u < acc) return succ.state;
  }
  return row.back().state;
}

OfflineDataset sample_offline(const LayeredMdp& mdp, const DataDistribution& mu, std::int64_t n, std::uint64_t seed,
                              std::uint64_t trial) {
  if (n < 1) throw InvalidArgument("sample_offline needs N >= 1");
  mu.check_compatible(mdp);

  OfflineDataset data{.levels = {}, .initial_state = mdp.initial_state(), .seed = seed, .trial = trial, .mu = mu};
  data.levels.resize(mdp.horizon());
  for (int h = 0; h < mdp.horizon(); ++h) {
    const auto atoms = mu.level(h);
    std::vector<double> cdf;
    cdf.reserve(atoms.size());
    double acc = 0.0;
    for (const auto& atom : atoms) cdf.push_back(acc += atom.prob);

    Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(h), trial);
    auto& out = data.levels[h];
    out.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      std::size_t k = pick(cdf, rng.uniform());
      while (atoms[k].prob == 0.0) --k;
      const auto& atom = atoms[k];
      Sample sample{atom.state, atom.action, draw_reward(mdp.reward(atom.state, atom.action), rng), kNoState};
      if (h + 1 < mdp.horizon()) sample.next = draw_successor(mdp.successors(atom.state, atom.action), rng);
      out.push_back(sample);
    }
  }
  return data;
}

double rollout_return(const LayeredMdp& mdp, const Policy& pi, Rng& rng) {
  StateId s = mdp.initial_state();
  double total = 0.0;
  for (int h = 0; h < mdp.horizon(); ++h) {
    const auto dist = pi.distribution(s);
    const double u = rng.uniform();
    ActionId a = 0;
    double acc = dist[0];
    while (u >= acc && a + 1 < mdp.num_actions()) acc += dist[++a];
    while (dist[a] == 0.0) --a;
    total += draw_reward(mdp.reward(s, a), rng);
    if (h + 1 < mdp.horizon()) s = draw_successor(mdp.successors(s, a), rng);
  }
  return total;
}

MonteCarloEstimate monte_carlo_value(const LayeredMdp& mdp, const Policy& pi, std::int64_t episodes,
                                     std::uint64_t seed) {
  if (episodes < 2) throw InvalidArgument("monte_carlo_value needs at least two episodes");
  pi.check_compatible(mdp);
  Rng rng = Rng::for_stream(seed, kAuxiliaryLevel, 0);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::int64_t t = 0; t < episodes; ++t) {
    const double g = rollout_return(mdp, pi, rng);
    const double delta = g - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (g - mean);
  }
  const double var = m2 / static_cast<double>(episodes - 1);
  return {mean, std::sqrt(var / static_cast<double>(episodes)), episodes};
}

}  // namespace oplab
