#include "oplab/features.hpp"

#include <algorithm>
#include <cmath>

#include "oplab/rng.hpp"

namespace oplab {

FeatureMap::FeatureMap(int num_states, int num_actions, Eigen::MatrixXd table)
    : num_states_(num_states), num_actions_(num_actions), table_(std::move(table)) {
  if (table_.rows() != static_cast<Eigen::Index>(num_states) * num_actions)
    throw InvalidArgument("feature table needs one row per state-action pair");
  if (table_.cols() < 1) throw InvalidArgument("feature dimension must be positive");
  if (!table_.allFinite()) throw InvalidArgument("feature table has non-finite entries");
  for (Eigen::Index r = 0; r < table_.rows(); ++r) {
    const double norm = table_.row(r).norm();
    if (norm > 1.0 + kFeatureNormTolerance)
      throw InvalidArgument("feature of pair " + std::to_string(r) + " has norm " + std::to_string(norm) + " > 1");
  }
}

void FeatureMap::check_compatible(const LayeredMdp& mdp) const {
  if (num_states_ != mdp.num_states() || num_actions_ != mdp.num_actions())
    throw InvalidArgument("feature map shape does not match the MDP");
}

double RealizabilityReport::max_residual() const {
  return residual.empty() ? 0.0 : *std::max_element(residual.begin(), residual.end());
}

RealizabilityReport fit_linear_q(const LayeredMdp& mdp, const ValueTables& values, const FeatureMap& phi) {
  phi.check_compatible(mdp);
  const int A = mdp.num_actions();
  RealizabilityReport report;
  for (int h = 0; h < mdp.horizon(); ++h) {
    const Eigen::Index rows = static_cast<Eigen::Index>(mdp.level_size(h)) * A;
    const Eigen::Index first = static_cast<Eigen::Index>(mdp.level_begin(h)) * A;
    const Eigen::MatrixXd X = phi.table().middleRows(first, rows);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.q.data() + first, rows);

    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    Eigen::VectorXd theta = cod.solve(y);
    report.residual.push_back((X * theta - y).cwiseAbs().maxCoeff());
    report.theta_norm.push_back(theta.norm());
    report.theta.push_back(std::move(theta));
  }
  return report;
}

RealizabilityReport fit_linear_q(const LayeredMdp& mdp, const Policy& pi, const FeatureMap& phi) {
  return fit_linear_q(mdp, exact_q_values(mdp, pi), phi);
}

double spot_check_realizability(const LayeredMdp& mdp, const FeatureMap& phi, int random_policies,
                                std::uint64_t seed) {
  double worst = 0.0;
  for (ActionId a = 0; a < mdp.num_actions(); ++a)
    worst = std::max(worst, fit_linear_q(mdp, Policy::constant(mdp.num_states(), mdp.num_actions(), a), phi).max_residual());
  for (int k = 0; k < random_policies; ++k) {
    const auto pi = Policy::random(mdp.num_states(), mdp.num_actions(), derive_seed(seed, static_cast<std::uint64_t>(k)));
    worst = std::max(worst, fit_linear_q(mdp, pi, phi).max_residual());
  }
  return worst;
}

std::vector<LevelCovariance> covariance(const DataDistribution& mu, const FeatureMap& phi) {
  std::vector<LevelCovariance> out;
  const int d = phi.dim();
  for (int h = 0; h < mu.horizon(); ++h) {
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(d, d);
    for (const auto& atom : mu.level(h)) {
      const Eigen::VectorXd f = phi(atom.state, atom.action);
      lambda.selfadjointView<Eigen::Lower>().rankUpdate(f, atom.prob);
    }
    lambda = lambda.selfadjointView<Eigen::Lower>();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lambda, Eigen::EigenvaluesOnly);
    out.push_back({std::move(lambda), eig.eigenvalues()(0), eig.eigenvalues()(d - 1)});
  }
  return out;
}

CoverageReport check_coverage(const DataDistribution& mu, const FeatureMap& phi, double threshold) {
  CoverageReport report;
  report.threshold = threshold;
  const double ceiling = 1.0 / phi.dim() + 1e-12;
  const auto levels = covariance(mu, phi);
  for (int h = 0; h < static_cast<int>(levels.size()); ++h) {
    const double sigma = levels[h].min_eigenvalue;
    report.min_eigenvalue.push_back(sigma);
    if (sigma < threshold) report.violations.push_back({h, sigma, "below threshold"});
    if (sigma > ceiling) report.violations.push_back({h, sigma, "above the 1/d ceiling"});
  }
  report.passed = report.violations.empty();
  return report;
}

}  // namespace oplab
