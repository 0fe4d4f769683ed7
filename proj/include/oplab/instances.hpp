#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oplab/features.hpp"
#include "oplab/mdp.hpp"

namespace oplab {

enum class InstanceKind {
  // Deterministic transitions, stochastic rewards only at the last level.
  Deterministic,
  // Stochastic transitions, deterministic rewards only at s_H^+ and s_H^-.
  Sparse,
};

std::string to_string(InstanceKind kind);
InstanceKind parse_instance_kind(const std::string& name);

struct HardInstanceBundle {
  InstanceKind kind;
  int d;
  int horizon;
  int d_hat;
  double r0;
  double max_r0;
  LayeredMdp mdp;
  FeatureMap phi;
  DataDistribution mu;
  Policy eval_policy;
  std::optional<Policy> data_policy;  // sparse instance only
  // exact_policy_value(mdp, eval_policy), never a closed form.
  double ground_truth_value;
};

struct DetInstanceOptions {
  // When set, e_1..e_d are the columns of a random orthogonal matrix drawn
  // from this seed instead of the standard basis.
  std::optional<std::uint64_t> rotation_seed;
  // Coefficients w_c of the hub feature sum_c w_c e_c (default d_hat^{-1/2}
  // each). Rewards on the hub chain follow W = sum_c w_c so that every
  // policy stays realizable and V = r0 * W^H.
  std::optional<std::vector<double>> hub_weights;
};

// Largest admissible r0: d_hat^{-H/2} (deterministic) or d_hat^{-(H-2)/2} (sparse).
double max_r0(InstanceKind kind, int d, int horizon);

HardInstanceBundle build_det_instance(int d, int horizon, double r0, const DetInstanceOptions& options = {});
HardInstanceBundle build_sparse_instance(int d, int horizon, double r0,
                                         std::optional<std::uint64_t> rotation_seed = std::nullopt);
HardInstanceBundle build_instance(InstanceKind kind, int d, int horizon, double r0);

// A root level is prepended: action a_1 pays 0.5 and enters a zero-reward
// absorbing chain, every other action enters the wrapped instance. The two new
// coordinates of the feature space belong to the root's two outcomes.
struct ReducedInstance {
  LayeredMdp mdp;
  FeatureMap phi;
  DataDistribution mu;
  Policy eval_policy;  // the wrapped instance's policy, entering at the root
};
ReducedInstance build_optimality_reduction(const HardInstanceBundle& bundle);

// Orthogonal d x d matrix from a seeded Gaussian QR.
Eigen::MatrixXd random_orthogonal(int d, std::uint64_t seed);

}  // namespace oplab
