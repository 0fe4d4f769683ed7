#include "oplab/lspe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oplab/dynamic_programming.hpp"

namespace oplab {

namespace {

void check_dataset(const OfflineDataset& data, const Policy& pi, const FeatureMap& phi) {
  if (data.horizon() < 1) throw InvalidArgument("dataset has no levels");
  if (pi.num_states() != phi.num_states() || pi.num_actions() != phi.num_actions())
    throw InvalidArgument("policy and feature map disagree on the state-action space");
  if (!pi.is_deterministic()) throw PreconditionError("LSPE evaluates deterministic policies only");
  for (int h = 0; h < data.horizon(); ++h)
    if (data.levels[h].empty()) throw InvalidArgument("dataset level " + std::to_string(h + 1) + " is empty");
}

}  // namespace

LinearQEstimate run_lspe(const OfflineDataset& data, const Policy& pi, const FeatureMap& phi, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be finite and >= 0");
  check_dataset(data, pi, phi);
  const int H = data.horizon();
  const int d = phi.dim();

  LinearQEstimate est;
  est.lambda = lambda;
  est.theta.resize(H);
  est.design.resize(H);
  est.features.resize(H);
  est.lookahead.resize(H);
  est.condition_number.resize(H);

  Eigen::VectorXd next_theta = Eigen::VectorXd::Zero(d);
  for (int h = H - 1; h >= 0; --h) {
    const auto& samples = data.levels[h];
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd Phi(n, d);
    Eigen::MatrixXd PhiBar = Eigen::MatrixXd::Zero(n, d);
    Eigen::VectorXd reward(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& x = samples[i];
      Phi.row(i) = phi(x.state, x.action).transpose();
      reward(i) = x.reward;
      if (h + 1 < H) PhiBar.row(i) = phi(x.next, pi.action(x.next)).transpose();
    }
    const Eigen::VectorXd target = reward + PhiBar * next_theta;

    Eigen::MatrixXd design = Phi.transpose() * Phi;
    design = (0.5 * (design + design.transpose())).eval();
    design.diagonal().array() += lambda;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(design, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues()(0);
    const double hi = eig.eigenvalues()(d - 1);
    est.condition_number[h] = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (lambda == 0.0 && !(lo > kDesignRankCutoff * design.trace())) throw SingularDesignError(h, lo, design.trace());

    const Eigen::LLT<Eigen::MatrixXd> llt(design);
    if (llt.info() != Eigen::Success) throw SingularDesignError(h, lo, design.trace());
    est.theta[h] = llt.solve(Phi.transpose() * target);
    next_theta = est.theta[h];

    est.design[h] = std::move(design);
    est.features[h] = std::move(Phi);
    est.lookahead[h] = std::move(PhiBar);
  }
  const StateId s1 = data.initial_state;
  est.value = phi(s1, pi.action(s1)).dot(est.theta[0]);
  return est;
}

IdentityReport check_error_identity(const OfflineDataset& data, const Policy& pi, const FeatureMap& phi, double lambda,
                                    const LayeredMdp& mdp) {
  if (!(lambda > 0.0)) throw PreconditionError("the error identity needs lambda > 0");
  phi.check_compatible(mdp);
  pi.check_compatible(mdp);
  const int H = mdp.horizon();
  if (data.horizon() != H) throw InvalidArgument("dataset horizon does not match the MDP");

  const ValueTables truth = exact_q_values(mdp, pi);
  const RealizabilityReport fit = fit_linear_q(mdp, truth, phi);
  for (int h = 0; h < H; ++h) {
    if (!(fit.residual[h] < kRealizabilityTolerance))
      throw PreconditionError("Q^pi is not realizable at level " + std::to_string(h + 1) +
                              " (residual " + std::to_string(fit.residual[h]) + ")");
  }

  const LinearQEstimate est = run_lspe(data, pi, phi, lambda);

  IdentityReport report;
  report.true_value = truth.value;
  report.estimate = est.value;
  report.lhs = (truth.value - est.value) * (truth.value - est.value);

  report.noise.resize(H);
  for (int h = 0; h < H; ++h) {
    const auto& samples = data.levels[h];
    Eigen::VectorXd xi(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& x = samples[i];
      const double next_value = h + 1 < H ? truth.v[x.next] : 0.0;
      xi(static_cast<Eigen::Index>(i)) = x.reward + next_value - truth.q_at(mdp, x.state, x.action);
    }
    report.max_abs_noise = std::max(report.max_abs_noise, xi.size() ? xi.cwiseAbs().maxCoeff() : 0.0);
    report.noise[h] = std::move(xi);
  }

  // Horner form of sum_h M_1 ... M_{h-1} t_h with M_h = Lhat_h^{-1} Phi_h^T PhiBar_{h+1},
  // applied to vectors right to left.
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(phi.dim());
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::LLT<Eigen::MatrixXd> llt(est.design[h]);
    Eigen::VectorXd rhs = est.features[h].transpose() * report.noise[h] - lambda * fit.theta[h];
    if (h + 1 < H) rhs += est.features[h].transpose() * (est.lookahead[h] * acc);
    acc = llt.solve(rhs);
  }
  const StateId s1 = mdp.initial_state();
  const double projected = phi(s1, pi.action(s1)).dot(acc);
  report.rhs = projected * projected;
  report.error_vector = std::move(acc);

  const double scale = std::max(std::abs(report.lhs), std::abs(report.rhs));
  report.relative_discrepancy = scale > 0.0 ? std::abs(report.lhs - report.rhs) / scale : 0.0;
  return report;
}

TheoremBound evaluate_theorem_bound(std::span<const double> shift_coefficients, int d, int horizon, double n,
                                    double delta, double c, double lambda_constant) {
  if (d < 1 || horizon < 1) throw InvalidArgument("d and H must be positive");
  if (!(n >= 1.0)) throw InvalidArgument("N must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (static_cast<int>(shift_coefficients.size()) != horizon) throw InvalidArgument("need one shift coefficient per level");

  TheoremBound out;
  out.product_c = 1.0;
  for (double ch : shift_coefficients) {
    if (!(ch >= 1.0)) throw InvalidArgument("shift coefficients must be >= 1");
    out.product_c *= ch;
  }
  const double log_term = std::log(d * horizon / delta);
  const double H = horizon;
  out.lambda = lambda_constant * H * std::sqrt(d * log_term * n);
  out.vacuous = std::isinf(out.product_c);
  out.bound = out.vacuous ? std::numeric_limits<double>::infinity()
                          : c * out.product_c * d * std::pow(H, 5) * std::sqrt(d * log_term / n);
  return out;
}

}  // namespace oplab
