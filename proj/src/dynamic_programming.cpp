#include "oplab/dynamic_programming.hpp"

#include <algorithm>
#include <limits>

namespace oplab {

ValueTables exact_q_values(const LayeredMdp& mdp, const Policy& pi) {
  pi.check_compatible(mdp);
  const int A = mdp.num_actions();
  ValueTables out;
  out.q.assign(static_cast<std::size_t>(mdp.num_states()) * A, 0.0);
  out.v.assign(mdp.num_states(), 0.0);

  for (int h = mdp.horizon() - 1; h >= 0; --h) {
    for (StateId s = mdp.level_begin(h); s < mdp.level_end(h); ++s) {
      double v = 0.0;
      for (ActionId a = 0; a < A; ++a) {
        double q = mdp.reward(s, a).mean();
        for (const auto& succ : mdp.successors(s, a)) q += succ.prob * out.v[succ.state];
        out.q[mdp.index(s, a)] = q;
        v += pi.prob(s, a) * q;
      }
      out.v[s] = v;
    }
  }
  out.value = out.v[mdp.initial_state()];
  return out;
}

double exact_policy_value(const LayeredMdp& mdp, const Policy& pi) { return exact_q_values(mdp, pi).value; }

OptimalSolution optimal_values(const LayeredMdp& mdp) {
  const int A = mdp.num_actions();
  ValueTables values;
  values.q.assign(static_cast<std::size_t>(mdp.num_states()) * A, 0.0);
  values.v.assign(mdp.num_states(), 0.0);
  std::vector<ActionId> greedy(mdp.num_states(), 0);

  for (int h = mdp.horizon() - 1; h >= 0; --h) {
    for (StateId s = mdp.level_begin(h); s < mdp.level_end(h); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (ActionId a = 0; a < A; ++a) {
        double q = mdp.reward(s, a).mean();
        for (const auto& succ : mdp.successors(s, a)) q += succ.prob * values.v[succ.state];
        values.q[mdp.index(s, a)] = q;
        if (q > best) {
          best = q;
          greedy[s] = a;
        }
      }
      values.v[s] = best;
    }
  }
  values.value = values.v[mdp.initial_state()];
  return {std::move(values), Policy::deterministic(A, greedy)};
}

std::vector<double> marginal_occupancy(const LayeredMdp& mdp, const Policy& pi) {
  pi.check_compatible(mdp);
  std::vector<double> occ(mdp.num_states(), 0.0);
  occ[mdp.initial_state()] = 1.0;
  for (int h = 0; h + 1 < mdp.horizon(); ++h) {
    for (StateId s = mdp.level_begin(h); s < mdp.level_end(h); ++s) {
      if (occ[s] == 0.0) continue;
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        const double w = occ[s] * pi.prob(s, a);
        if (w == 0.0) continue;
        for (const auto& succ : mdp.successors(s, a)) occ[succ.state] += w * succ.prob;
      }
    }
  }
  return occ;
}

DataDistribution on_policy_distribution(const LayeredMdp& mdp, const Policy& pi) {
  const auto occ = marginal_occupancy(mdp, pi);
  std::vector<std::vector<Atom>> levels(mdp.horizon());
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (StateId s = mdp.level_begin(h); s < mdp.level_end(h); ++s) {
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        const double p = occ[s] * pi.prob(s, a);
        if (p > 0.0) levels[h].push_back({s, a, p});
      }
    }
  }
  return DataDistribution(std::move(levels));
}

}  // namespace oplab
