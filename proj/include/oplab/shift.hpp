#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "oplab/features.hpp"
#include "oplab/mdp.hpp"

namespace oplab {

// Rank cutoff relative to the largest eigenvalue of Lambda.
inline constexpr double kShiftRankCutoff = 1e-10;

// Per level h: Lbar_h = E[phi(sbar, pi(sbar)) phi(sbar, pi(sbar))^T] with
// (s, a) ~ mu_{h-1}, sbar ~ P(.|s, a); Lbar_1 is the outer product of the
// initial feature. Index h pairs with Lambda_h. pi must be deterministic.
std::vector<Eigen::MatrixXd> lookahead_covariance(const LayeredMdp& mdp, const DataDistribution& mu, const Policy& pi,
                                                  const FeatureMap& phi);

// Smallest C with Lbar <= C * Lambda in the Loewner order:
// lambda_max(Lambda^{+/2} Lbar Lambda^{+/2}), or +infinity when Lbar has mass
// outside range(Lambda). Throws InvalidArgument on non-PSD input.
double minimal_shift_coefficient(const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& lambda_bar);

// Sup-norm least-squares residual of the Bellman backup family at one level.
// For a zero-based level h in [1, H-1], the backup
//   theta -> E[R(s,a)] + sum_s' P(s'|s,a) phi(s', pi(s'))^T theta
// is fit on phi over all pairs of level h-1, for theta = 0 and theta = e_i.
// Returns the largest of the d+1 residuals.
double completeness_residual(const LayeredMdp& mdp, const Policy& pi, const FeatureMap& phi, int level);

// Same residual, but only for the backups of the given weight vectors.
double completeness_residual_along(const LayeredMdp& mdp, const Policy& pi, const FeatureMap& phi, int level,
                                   std::span<const Eigen::VectorXd> directions);

struct ShiftReport {
  std::vector<Eigen::MatrixXd> lambda;
  std::vector<Eigen::MatrixXd> lambda_bar;
  std::vector<double> sigma_min;
  std::vector<double> coefficient;  // +inf when domination is impossible
  std::vector<double> completeness;  // NaN at the first level
  double product = 1.0;

  bool any_infinite() const;
};

ShiftReport shift_report(const LayeredMdp& mdp, const DataDistribution& mu, const Policy& pi, const FeatureMap& phi);

}  // namespace oplab
