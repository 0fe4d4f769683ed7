#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "oplab/features.hpp"
#include "oplab/mdp.hpp"

namespace oplab {

// Relative rank guard for unregularized solves: sigma_min(design) must exceed
// this fraction of its trace.
inline constexpr double kDesignRankCutoff = 1e-10;

struct LinearQEstimate {
  std::vector<Eigen::VectorXd> theta;
  double lambda = 0.0;
  // design[h] = Phi_h^T Phi_h + lambda I
  std::vector<Eigen::MatrixXd> design;
  // features[h] = Phi_h, rows phi(s_h^i, a_h^i)
  std::vector<Eigen::MatrixXd> features;
  // lookahead[h] = rows phi(sbar_h^i, pi(sbar_h^i)); zero at the last level
  std::vector<Eigen::MatrixXd> lookahead;
  std::vector<double> condition_number;
  // phi(s_1, pi(s_1))^T theta_1
  double value = 0.0;
};

// Backward ridge regressions with plug-in next-level targets. pi must be
// deterministic. lambda = 0 is accepted when every design is numerically full
// rank; otherwise SingularDesignError names the offending level.
LinearQEstimate run_lspe(const OfflineDataset& data, const Policy& pi, const FeatureMap& phi, double lambda);

struct IdentityReport {
  double lhs = 0.0;  // (V^pi - Vhat)^2
  double rhs = 0.0;  // squared Lambdabar_1 norm of the telescoped sum
  double relative_discrepancy = 0.0;
  double true_value = 0.0;
  double estimate = 0.0;
  std::vector<Eigen::VectorXd> noise;  // xi_h
  double max_abs_noise = 0.0;
  Eigen::VectorXd error_vector;  // telescoped thetahat_1 - theta_1
};

// Evaluates both sides of the exact error equality for LSPE on one dataset.
// The noise xi_h uses the exact V^pi and Q^pi from dynamic programming.
// Requires lambda > 0 and realizable Q^pi (PreconditionError otherwise).
IdentityReport check_error_identity(const OfflineDataset& data, const Policy& pi, const FeatureMap& phi, double lambda,
                                    const LayeredMdp& mdp);

struct TheoremBound {
  double bound = 0.0;  // +inf when some C_h is infinite
  double lambda = 0.0;
  double product_c = 0.0;
  bool vacuous = false;
};

// c * prod(C_h) * d H^5 * sqrt(d log(dH/delta) / N), together with the
// prescribed regularizer lambda = C H sqrt(d log(dH/delta) N).
TheoremBound evaluate_theorem_bound(std::span<const double> shift_coefficients, int d, int horizon, double n,
                                    double delta, double c = 1.0, double lambda_constant = 1.0);

}  // namespace oplab
