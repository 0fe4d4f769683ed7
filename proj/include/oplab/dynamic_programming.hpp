#pragma once

#include <vector>

#include "oplab/mdp.hpp"

namespace oplab {

// Exact Q and V tables indexed by global state id (Q by LayeredMdp::index).
struct ValueTables {
  std::vector<double> q;
  std::vector<double> v;
  double value = 0.0;  // V_1(s_1)

  double q_at(const LayeredMdp& mdp, StateId s, ActionId a) const { return q[mdp.index(s, a)]; }
};

// Backward induction for a fixed policy.
ValueTables exact_q_values(const LayeredMdp& mdp, const Policy& pi);

double exact_policy_value(const LayeredMdp& mdp, const Policy& pi);

// Backward induction with a max over actions. The returned policy is greedy,
// ties broken toward the lowest action index.
struct OptimalSolution {
  ValueTables values;
  Policy greedy;
};
OptimalSolution optimal_values(const LayeredMdp& mdp);

// Pr[s_h = s | pi] for every state; each level sums to one.
std::vector<double> marginal_occupancy(const LayeredMdp& mdp, const Policy& pi);

// The state-action distribution mu_h^pi(s) * pi(a|s) at every level.
DataDistribution on_policy_distribution(const LayeredMdp& mdp, const Policy& pi);

}  // namespace oplab
