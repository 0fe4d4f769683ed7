#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "oplab/dynamic_programming.hpp"
#include "oplab/mdp.hpp"

namespace oplab {

// phi(s, a) in R^d for every state-action pair, ||phi||_2 <= 1.
class FeatureMap {
 public:
  // One row per (state, action) in LayeredMdp::index order.
  FeatureMap(int num_states, int num_actions, Eigen::MatrixXd table);

  int dim() const noexcept { return static_cast<int>(table_.cols()); }
  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }
  const Eigen::MatrixXd& table() const noexcept { return table_; }

  auto operator()(StateId s, ActionId a) const {
    return table_.row(static_cast<Eigen::Index>(s) * num_actions_ + a).transpose();
  }

  void check_compatible(const LayeredMdp& mdp) const;

 private:
  int num_states_;
  int num_actions_;
  Eigen::MatrixXd table_;
};

inline constexpr double kFeatureNormTolerance = 1e-12;
inline constexpr double kRealizabilityTolerance = 1e-8;

struct RealizabilityReport {
  std::vector<Eigen::VectorXd> theta;
  std::vector<double> residual;  // sup-norm over all pairs of the level
  std::vector<double> theta_norm;

  double max_residual() const;
};

// Least squares of the exact Q table on the features at every level, over all
// state-action pairs of that level (minimum-norm on rank deficiency).
RealizabilityReport fit_linear_q(const LayeredMdp& mdp, const Policy& pi, const FeatureMap& phi);
RealizabilityReport fit_linear_q(const LayeredMdp& mdp, const ValueTables& values, const FeatureMap& phi);

// Fits the |A| constant policies and K seeded random stochastic policies and
// returns the worst residual seen.
double spot_check_realizability(const LayeredMdp& mdp, const FeatureMap& phi, int random_policies, std::uint64_t seed);

struct LevelCovariance {
  Eigen::MatrixXd matrix;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

// Lambda_h = E_{mu_h}[phi phi^T], exact over the finite support.
std::vector<LevelCovariance> covariance(const DataDistribution& mu, const FeatureMap& phi);

struct CoverageViolation {
  int level = 0;
  double min_eigenvalue = 0.0;
  std::string reason;
};

struct CoverageReport {
  bool passed = true;
  double threshold = 0.0;
  std::vector<double> min_eigenvalue;
  std::vector<CoverageViolation> violations;
};

// sigma_min(Lambda_h) >= threshold at every level; also flags any level whose
// sigma_min exceeds the 1/d ceiling that unit-norm features impose.
CoverageReport check_coverage(const DataDistribution& mu, const FeatureMap& phi, double threshold);

}  // namespace oplab
