#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "../support/generators.hpp"
#include "oplab/dynamic_programming.hpp"
#include "oplab/instances.hpp"
#include "oplab/shift.hpp"

using namespace oplab;
using namespace oplab::testing;

namespace {

// Largest generalized eigenvalue of (Lbar, Lambda) for positive definite Lambda.
double dense_oracle(const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& lambda_bar) {
  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(lambda_bar, lambda);
  return ges.eigenvalues().maxCoeff();
}

double min_eig(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

}  // namespace

TEST_CASE("equality gives C = 1") {
  Rng gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + static_cast<int>(gen.below(6));
    const auto m = random_psd(gen, d, 1 + static_cast<int>(gen.below(d)));
    CHECK(minimal_shift_coefficient(m, m) == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(minimal_shift_coefficient(Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3)) == 1.0);
}

TEST_CASE("deterministic instance lookahead covariance and C = 3") {
  const auto det = build_det_instance(4, 4, 0.1);
  const int dh = det.d_hat;
  const auto bars = lookahead_covariance(det.mdp, det.mu, det.eval_policy, det.phi);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(4);
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(4, 4);
  for (int c = 0; c < dh; ++c) {
    v(c) = 1.0 / std::sqrt(dh);
    block(c, c) = 1.0 / (2.0 * dh);
  }
  const Eigen::MatrixXd want = 0.5 * v * v.transpose() + block;

  // Enumerate supp(mu) x successors by hand as a second oracle.
  for (int h = 1; h < 4; ++h) {
    Eigen::MatrixXd hand = Eigen::MatrixXd::Zero(4, 4);
    for (const auto& atom : det.mu.level(h - 1)) {
      const StateId next = det.mdp.successors(atom.state, atom.action)[0].state;
      const Eigen::VectorXd f = det.phi(next, 0);
      hand += atom.prob * f * f.transpose();
    }
    CHECK((bars[h] - want).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((bars[h] - hand).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::MatrixXd lambda = Eigen::MatrixXd::Identity(4, 4) / 4.0;
    CHECK(std::abs(minimal_shift_coefficient(lambda, bars[h]) - 3.0) < 1e-9);
    CHECK(std::abs(dense_oracle(lambda, bars[h]) - 3.0) < 1e-9);
  }

  // Lbar_1 is the rank-one outer product of the initial feature.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(bars[0]);
  const double norm2 = det.phi(det.mdp.initial_state(), 0).squaredNorm();
  CHECK(std::abs(eig.eigenvalues()(3) - norm2) < 1e-15);
  CHECK(eig.eigenvalues().head(3).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("range violations give infinity") {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(2, 2);
  lambda(0, 0) = 1.0;
  Eigen::MatrixXd bar = Eigen::MatrixXd::Zero(2, 2);
  bar(1, 1) = 0.5;
  CHECK(std::isinf(minimal_shift_coefficient(lambda, bar)));
  bar(0, 0) = 0.5;
  CHECK(std::isinf(minimal_shift_coefficient(lambda, bar)));
  CHECK(std::isinf(minimal_shift_coefficient(Eigen::MatrixXd::Zero(2, 2), bar)));
  // Lbar inside range(Lambda) stays finite even when Lambda is singular.
  bar(1, 1) = 0.0;
  CHECK(minimal_shift_coefficient(lambda, bar) == doctest::Approx(0.5));
  CHECK(minimal_shift_coefficient(lambda, Eigen::MatrixXd::Zero(2, 2)) == 0.0);
}

TEST_CASE("input validation") {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(minimal_shift_coefficient(bad, Eigen::MatrixXd::Identity(2, 2)), InvalidArgument);
  CHECK_THROWS_AS(minimal_shift_coefficient(Eigen::MatrixXd::Identity(2, 2), bad), InvalidArgument);
  Eigen::MatrixXd skew = Eigen::MatrixXd::Identity(2, 2);
  skew(0, 1) = 0.3;
  CHECK_THROWS_AS(minimal_shift_coefficient(skew, Eigen::MatrixXd::Identity(2, 2)), InvalidArgument);
  CHECK_THROWS_AS(minimal_shift_coefficient(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(3, 3)),
                  InvalidArgument);
}

TEST_CASE("random pairs: dense oracle, domination and scale consistency") {
  Rng gen(2718);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + static_cast<int>(gen.below(6));
    const auto lambda = random_psd(gen, d, d + 2);
    const auto bar = random_psd(gen, d, 1 + static_cast<int>(gen.below(d + 1)));
    const double c = minimal_shift_coefficient(lambda, bar);
    REQUIRE(std::isfinite(c));
    CHECK(c == doctest::Approx(dense_oracle(lambda, bar)).epsilon(1e-8));
    CHECK(min_eig(c * lambda - bar) >= -1e-9 * std::max(1.0, c * lambda.norm()));
    const double t = 0.01 + 10.0 * gen.uniform();
    CHECK(minimal_shift_coefficient(lambda, t * bar) == doctest::Approx(t * c).epsilon(1e-10));
  }
  // Singular Lambda with Lbar built inside its range.
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + static_cast<int>(gen.below(5));
    const int r = 1 + static_cast<int>(gen.below(d - 1));
    Eigen::MatrixXd basis(d, r);
    for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = gen.normal();
    const auto inner_l = random_psd(gen, r, r + 1);
    const auto inner_b = random_psd(gen, r, 1 + static_cast<int>(gen.below(r)));
    const Eigen::MatrixXd lambda = basis * inner_l * basis.transpose();
    const Eigen::MatrixXd bar = basis * inner_b * basis.transpose();
    const double c = minimal_shift_coefficient(0.5 * (lambda + lambda.transpose()), 0.5 * (bar + bar.transpose()));
    REQUIRE(std::isfinite(c));
    CHECK(c == doctest::Approx(dense_oracle(inner_l, inner_b)).epsilon(1e-6));
    CHECK(min_eig(c * lambda - bar) >= -1e-9 * std::max(1.0, c * lambda.norm()));
  }
}

TEST_CASE("coverage bounds the shift coefficient on random instances") {
  Rng gen(31337);
  for (int trial = 0; trial < 100; ++trial) {
    const auto mdp = random_mdp(gen, {.horizon = 3, .max_states = 4, .num_actions = 3});
    const int d = 1 + static_cast<int>(gen.below(4));
    const auto phi = random_features(gen, mdp, d);
    const auto mu = random_distribution(gen, mdp, true);
    const auto pi = Policy::random(mdp.num_states(), 3, gen.next(), true);
    const auto report = shift_report(mdp, mu, pi, phi);
    for (int h = 0; h < 3; ++h) {
      if (report.sigma_min[h] <= 1e-9) continue;
      CHECK(report.coefficient[h] <= 1.0 / report.sigma_min[h] * (1.0 + 1e-9));
    }
    CHECK(std::isnan(report.completeness[0]));
  }
}

TEST_CASE("constant lookahead feature") {
  MdpBuilder b({{"r"}, {"x", "y"}}, 2);
  b.set_initial_state(0);
  b.set_transition(0, 0, {{1, 0.3}, {2, 0.7}});
  b.set_deterministic_transition(0, 1, 2);
  const auto mdp = b.build();
  Eigen::MatrixXd table(6, 2);
  table << 1, 0, 0, 1, 0.6, 0.8, 0, 0, 0.6, 0.8, 0, 0;
  const FeatureMap phi(3, 2, table);
  const auto mu = DataDistribution::uniform_over({{{0, 0}, {0, 1}}, {{1, 0}, {2, 0}}});
  const auto bars = lookahead_covariance(mdp, mu, Policy::constant(3, 2, 0), phi);
  const Eigen::Vector2d u(0.6, 0.8);
  CHECK((bars[1] - u * u.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(lookahead_covariance(mdp, mu, Policy::uniform(3, 2), phi), PreconditionError);
}

TEST_CASE("product of shift coefficients on the deterministic instance") {
  for (int d : {4, 6, 8}) {
    for (int H : {2, 3, 4, 5}) {
      const auto det = build_det_instance(d, H, 0.0);
      const auto report = shift_report(det.mdp, det.mu, det.eval_policy, det.phi);
      CHECK_FALSE(report.any_infinite());
      CHECK(report.product >= std::pow(d / 2.0, H - 1) * (1.0 - 1e-12));
      for (int h = 1; h < H; ++h) CHECK(std::abs(report.coefficient[h] - (d / 2.0 + 1.0)) < 1e-9);
    }
  }
}

TEST_CASE("completeness residuals") {
  Rng gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mdp = random_mdp(gen, {.horizon = 4, .max_states = 3, .num_actions = 2});
    const auto pi = Policy::random(mdp.num_states(), 2, gen.next(), true);
    const auto phi = tabular_features(mdp);
    for (int h = 1; h < 4; ++h) CHECK(completeness_residual(mdp, pi, phi, h) < 1e-12);
  }

  const auto det = build_det_instance(4, 4, max_r0(InstanceKind::Deterministic, 4, 4));
  const auto fit = fit_linear_q(det.mdp, det.eval_policy, det.phi);
  for (int h = 1; h < 4; ++h) {
    const std::vector<Eigen::VectorXd> realized{fit.theta[h]};
    CHECK(completeness_residual_along(det.mdp, det.eval_policy, det.phi, h, realized) < 1e-12);
    // The full linear span is not closed under the backup here.
    CHECK(completeness_residual(det.mdp, det.eval_policy, det.phi, h) > 1e-3);
  }
  CHECK_THROWS_AS(completeness_residual(det.mdp, det.eval_policy, det.phi, 0), InvalidArgument);
  CHECK_THROWS_AS(completeness_residual(det.mdp, det.eval_policy, det.phi, 4), InvalidArgument);

  // One shared feature cannot fit two different backups.
  MdpBuilder b({{"r"}, {"x", "y"}}, 2);
  b.set_initial_state(0);
  b.set_deterministic_transition(0, 0, 1).set_deterministic_transition(0, 1, 2);
  b.set_reward(0, 0, RewardModel::deterministic(0.2)).set_reward(0, 1, RewardModel::deterministic(-0.4));
  const auto mdp = b.build();
  const FeatureMap flat(3, 2, Eigen::MatrixXd::Constant(6, 1, 0.5));
  CHECK(completeness_residual(mdp, Policy::constant(3, 2, 0), flat, 1) > 0.1);
}
