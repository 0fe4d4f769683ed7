#include "oplab/shift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oplab {

namespace {

Eigen::VectorXd expected_feature(const FeatureMap& phi, const Policy& pi, StateId s) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(phi.dim());
  for (ActionId a = 0; a < phi.num_actions(); ++a)
    if (const double p = pi.prob(s, a); p > 0.0) f += p * phi(s, a);
  return f;
}

void check_psd(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw InvalidArgument(std::string(name) + " must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument(std::string(name) + " is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double top = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 0.0);
  if (eig.eigenvalues()(0) < -kShiftRankCutoff * std::max(top, 1e-300))
    throw InvalidArgument(std::string(name) + " is not positive semidefinite");
}

struct BackupSystem {
  Eigen::MatrixXd features;  // pairs x d at level h-1
  Eigen::MatrixXd next;      // pairs x d expected next feature
  Eigen::VectorXd reward;    // pairs
};

BackupSystem backup_system(const LayeredMdp& mdp, const Policy& pi, const FeatureMap& phi, int level) {
  if (level < 1 || level >= mdp.horizon())
    throw InvalidArgument("completeness is defined for levels 2..H, got " + std::to_string(level + 1));
  phi.check_compatible(mdp);
  pi.check_compatible(mdp);
  const int prev = level - 1;
  const int A = mdp.num_actions();
  const Eigen::Index rows = static_cast<Eigen::Index>(mdp.level_size(prev)) * A;
  BackupSystem sys{Eigen::MatrixXd(rows, phi.dim()), Eigen::MatrixXd::Zero(rows, phi.dim()), Eigen::VectorXd(rows)};

  std::vector<Eigen::VectorXd> next_feature(mdp.level_size(level));
  for (StateId s = mdp.level_begin(level); s < mdp.level_end(level); ++s)
    next_feature[s - mdp.level_begin(level)] = expected_feature(phi, pi, s);

  Eigen::Index r = 0;
  for (StateId s = mdp.level_begin(prev); s < mdp.level_end(prev); ++s) {
    for (ActionId a = 0; a < A; ++a, ++r) {
      sys.features.row(r) = phi(s, a).transpose();
      sys.reward(r) = mdp.reward(s, a).mean();
      for (const auto& succ : mdp.successors(s, a))
        sys.next.row(r) += succ.prob * next_feature[succ.state - mdp.level_begin(level)].transpose();
    }
  }
  return sys;
}

double sup_residual(const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>& cod, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& y) {
  return (x * cod.solve(y) - y).cwiseAbs().maxCoeff();
}

}  // namespace

std::vector<Eigen::MatrixXd> lookahead_covariance(const LayeredMdp& mdp, const DataDistribution& mu, const Policy& pi,
                                                  const FeatureMap& phi) {
  phi.check_compatible(mdp);
  pi.check_compatible(mdp);
  mu.check_compatible(mdp);
  if (!pi.is_deterministic()) throw PreconditionError("lookahead covariance needs a deterministic policy");
  const int d = phi.dim();
  std::vector<Eigen::MatrixXd> out(mdp.horizon(), Eigen::MatrixXd::Zero(d, d));

  const StateId s1 = mdp.initial_state();
  const Eigen::VectorXd f1 = phi(s1, pi.action(s1));
  out[0] = f1 * f1.transpose();
  for (int h = 1; h < mdp.horizon(); ++h) {
    for (const auto& atom : mu.level(h - 1)) {
      for (const auto& succ : mdp.successors(atom.state, atom.action)) {
        const Eigen::VectorXd f = phi(succ.state, pi.action(succ.state));
        out[h].noalias() += (atom.prob * succ.prob) * (f * f.transpose());
      }
    }
  }
  return out;
}

double minimal_shift_coefficient(const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& lambda_bar) {
  check_psd(lambda, "Lambda");
  check_psd(lambda_bar, "Lambda-bar");
  if (lambda.rows() != lambda_bar.rows()) throw InvalidArgument("Lambda and Lambda-bar differ in size");

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lambda);
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double top = values(values.size() - 1);
  const double bar_scale = lambda_bar.trace();
  if (bar_scale <= 0.0) return 0.0;
  if (top <= 0.0) return std::numeric_limits<double>::infinity();

  const double cutoff = kShiftRankCutoff * top;
  std::vector<Eigen::Index> kept;
  std::vector<Eigen::Index> dropped;
  for (Eigen::Index i = 0; i < values.size(); ++i) (values(i) > cutoff ? kept : dropped).push_back(i);

  if (!dropped.empty()) {
    Eigen::MatrixXd null_basis(lambda.rows(), static_cast<Eigen::Index>(dropped.size()));
    for (std::size_t k = 0; k < dropped.size(); ++k) null_basis.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(dropped[k]);
    // Lbar is PSD, so any mass outside range(Lambda) shows up on this block.
    const double outside = (null_basis.transpose() * lambda_bar * null_basis).trace();
    if (outside > kShiftRankCutoff * bar_scale) return std::numeric_limits<double>::infinity();
  }

  Eigen::MatrixXd whiten(lambda.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k)
    whiten.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(kept[k]) / std::sqrt(values(kept[k]));
  Eigen::MatrixXd m = whiten.transpose() * lambda_bar * whiten;
  m = (0.5 * (m + m.transpose())).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gen(m, Eigen::EigenvaluesOnly);
  return std::max(0.0, gen.eigenvalues()(gen.eigenvalues().size() - 1));
}

double completeness_residual(const LayeredMdp& mdp, const Policy& pi, const FeatureMap& phi, int level) {
  const BackupSystem sys = backup_system(mdp, pi, phi, level);
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sys.features);
  double worst = sup_residual(cod, sys.features, sys.reward);
  for (Eigen::Index i = 0; i < sys.next.cols(); ++i)
    worst = std::max(worst, sup_residual(cod, sys.features, sys.reward + sys.next.col(i)));
  return worst;
}

double completeness_residual_along(const LayeredMdp& mdp, const Policy& pi, const FeatureMap& phi, int level,
                                   std::span<const Eigen::VectorXd> directions) {
  const BackupSystem sys = backup_system(mdp, pi, phi, level);
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sys.features);
  double worst = 0.0;
  for (const auto& theta : directions) {
    if (theta.size() != sys.next.cols()) throw InvalidArgument("direction has the wrong dimension");
    worst = std::max(worst, sup_residual(cod, sys.features, sys.reward + sys.next * theta));
  }
  return worst;
}

bool ShiftReport::any_infinite() const {
  return std::any_of(coefficient.begin(), coefficient.end(), [](double c) { return std::isinf(c); });
}

ShiftReport shift_report(const LayeredMdp& mdp, const DataDistribution& mu, const Policy& pi, const FeatureMap& phi) {
  ShiftReport report;
  for (auto& level : covariance(mu, phi)) {
    report.sigma_min.push_back(level.min_eigenvalue);
    report.lambda.push_back(std::move(level.matrix));
  }
  report.lambda_bar = lookahead_covariance(mdp, mu, pi, phi);
  for (int h = 0; h < mdp.horizon(); ++h) {
    const double c = minimal_shift_coefficient(report.lambda[h], report.lambda_bar[h]);
    report.coefficient.push_back(c);
    report.product *= c;
    report.completeness.push_back(h == 0 ? std::numeric_limits<double>::quiet_NaN()
                                         : completeness_residual(mdp, pi, phi, h));
  }
  return report;
}

}  // namespace oplab
