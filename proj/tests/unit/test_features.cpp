#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "../support/generators.hpp"
#include "oplab/dynamic_programming.hpp"
#include "oplab/features.hpp"
#include "oplab/instances.hpp"

using namespace oplab;
using namespace oplab::testing;

namespace {

// Sup residual of the least-squares fit at one level, via an SVD solve.
double svd_residual(const LayeredMdp& mdp, const ValueTables& q, const FeatureMap& phi, int h) {
  const int A = mdp.num_actions();
  const Eigen::Index rows = static_cast<Eigen::Index>(mdp.level_size(h)) * A;
  Eigen::MatrixXd X(rows, phi.dim());
  Eigen::VectorXd y(rows);
  Eigen::Index r = 0;
  for (StateId s = mdp.level_begin(h); s < mdp.level_end(h); ++s)
    for (ActionId a = 0; a < A; ++a, ++r) {
      X.row(r) = phi(s, a).transpose();
      y(r) = q.q_at(mdp, s, a);
    }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return (X * svd.solve(y) - y).cwiseAbs().maxCoeff();
}

FeatureMap rotate(const FeatureMap& phi, const Eigen::MatrixXd& R) {
  return FeatureMap(phi.num_states(), phi.num_actions(), phi.table() * R.transpose());
}

}  // namespace

TEST_CASE("feature norms are bounded") {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, 2);
  t(0, 0) = 1.0 + 1e-9;
  CHECK_THROWS_AS(FeatureMap(1, 2, t), InvalidArgument);
  t(0, 0) = 1.0 + 1e-13;
  CHECK_NOTHROW(FeatureMap(1, 2, t));
  CHECK_THROWS_AS(FeatureMap(2, 2, t), InvalidArgument);
}

TEST_CASE("deterministic instance is realizable for random policies") {
  for (int d : {4, 6, 8}) {
    for (int H : {2, 3, 4, 5}) {
      const auto b = build_det_instance(d, H, 0.7 * max_r0(InstanceKind::Deterministic, d, H));
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto pi = Policy::random(b.mdp.num_states(), 2, 1000 + seed);
        CHECK(fit_linear_q(b.mdp, pi, b.phi).max_residual() < 1e-8);
      }
      CHECK(spot_check_realizability(b.mdp, b.phi, 20, 3) < 1e-8);
    }
  }
}

TEST_CASE("last-level weights") {
  const double r0 = max_r0(InstanceKind::Deterministic, 6, 4);
  const auto det = build_det_instance(6, 4, r0);
  const auto fit = fit_linear_q(det.mdp, Policy::random(det.mdp.num_states(), 2, 4), det.phi);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(std::abs(fit.theta.back()(i) - r0) < 1e-12);

  const auto sp = build_sparse_instance(8, 5, 0.1);
  const auto sp_fit = fit_linear_q(sp.mdp, sp.eval_policy, sp.phi);
  CHECK(sp_fit.max_residual() < 1e-8);
  Eigen::VectorXd want = Eigen::VectorXd::Zero(8);
  want(sp.d_hat) = 1.0;
  want(sp.d_hat + 1) = -1.0;
  CHECK((sp_fit.theta.back() - want).norm() < 1e-12);
}

TEST_CASE("fit residual matches an SVD least-squares oracle on random problems") {
  Rng gen(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto mdp = random_mdp(gen, {.horizon = 3, .max_states = 4, .num_actions = 3});
    const int d = 1 + static_cast<int>(gen.below(5));
    const auto phi = random_features(gen, mdp, d);
    const auto pi = Policy::random(mdp.num_states(), 3, gen.next());
    const auto q = exact_q_values(mdp, pi);
    const auto fit = fit_linear_q(mdp, pi, phi);
    for (int h = 0; h < 3; ++h) {
      CHECK(fit.residual[h] >= 0.0);
      CHECK(fit.residual[h] == doctest::Approx(svd_residual(mdp, q, phi, h)).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("fit residual is invariant to orthonormal re-basing") {
  Rng gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto mdp = random_mdp(gen, {.horizon = 3, .max_states = 4, .num_actions = 2});
    const int d = 2 + static_cast<int>(gen.below(4));
    const auto phi = random_features(gen, mdp, d);
    const auto pi = Policy::random(mdp.num_states(), 2, gen.next());
    const auto a = fit_linear_q(mdp, pi, phi);
    const auto b = fit_linear_q(mdp, pi, rotate(phi, random_orthogonal(d, gen.next())));
    for (int h = 0; h < 3; ++h) CHECK(std::abs(a.residual[h] - b.residual[h]) < 1e-9);
  }
  const auto rotated = build_det_instance(4, 3, 0.2, {.rotation_seed = 17});
  CHECK(fit_linear_q(rotated.mdp, rotated.eval_policy, rotated.phi).max_residual() < 1e-8);
  CHECK(spot_check_realizability(rotated.mdp, rotated.phi, 20, 1) < 1e-8);
}

TEST_CASE("a realizable fit reproduces the policy value") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto det = build_det_instance(4, 4, 0.2);
    const auto pi = Policy::random(det.mdp.num_states(), 2, seed, true);
    const auto fit = fit_linear_q(det.mdp, pi, det.phi);
    REQUIRE(fit.max_residual() < 1e-8);
    const StateId s1 = det.mdp.initial_state();
    CHECK(std::abs(det.phi(s1, pi.action(s1)).dot(fit.theta[0]) - exact_policy_value(det.mdp, pi)) < 1e-7);
  }
}

TEST_CASE("tabular features fit any policy exactly") {
  Rng gen(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto mdp = random_mdp(gen, {.horizon = 4, .max_states = 3, .num_actions = 2});
    CHECK(spot_check_realizability(mdp, tabular_features(mdp), 10, gen.next()) < 1e-10);
  }
  const auto mdp = random_mdp(gen, {.horizon = 3, .max_states = 4, .num_actions = 3});
  CHECK(spot_check_realizability(mdp, random_features(gen, mdp, 1), 5, 1) > 1e-6);
}

TEST_CASE("coverage spectra of the hard instances") {
  for (int d : {4, 6, 8}) {
    for (int H : {2, 3, 4, 5}) {
      const auto det = build_det_instance(d, H, 0.0);
      for (const auto& level : covariance(det.mu, det.phi)) {
        CHECK((level.matrix - Eigen::MatrixXd::Identity(d, d) / d).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(level.min_eigenvalue - 1.0 / d) < 1e-12);
      }
      CHECK(check_coverage(det.mu, det.phi, 1.0 / d - 1e-9).passed);
      const auto fail = check_coverage(det.mu, det.phi, 1.0 / d + 0.01);
      CHECK_FALSE(fail.passed);
      CHECK(fail.violations.size() == static_cast<std::size_t>(H));
    }
  }
  for (int d : {6, 8}) {
    for (int H : {4, 5}) {
      const auto sp = build_sparse_instance(d, H, 0.0);
      for (const auto& level : covariance(sp.mu, sp.phi)) CHECK(std::abs(level.min_eigenvalue - 1.0 / d) < 1e-12);
      CHECK(check_coverage(sp.mu, sp.phi, 1.0 / d - 1e-9).passed);
    }
  }
}

TEST_CASE("rank-one data distributions fail coverage") {
  const auto det = build_det_instance(4, 3, 0.0);
  std::vector<std::vector<Atom>> levels(3);
  for (int h = 0; h < 3; ++h) levels[h].push_back({det.mdp.level_begin(h), 0, 1.0});
  const DataDistribution point(std::move(levels));
  for (const auto& level : covariance(point, det.phi)) {
    CHECK(std::abs(level.min_eigenvalue) < 1e-15);
    CHECK(level.max_eigenvalue == doctest::Approx(1.0));
  }
  const auto report = check_coverage(point, det.phi, 0.25 - 1e-9);
  CHECK_FALSE(report.passed);
  CHECK(report.violations.size() == 3);
}

TEST_CASE("sigma_min never exceeds 1/d under norm-bounded features") {
  Rng gen(404);
  for (int trial = 0; trial < 200; ++trial) {
    const auto mdp = random_mdp(gen, {.horizon = 2, .max_states = 5, .num_actions = 3});
    const int d = 1 + static_cast<int>(gen.below(6));
    const auto phi = random_features(gen, mdp, d, gen.bernoulli(0.5));
    const auto mu = random_distribution(gen, mdp, gen.bernoulli(0.5));
    for (const auto& level : covariance(mu, phi)) {
      CHECK(level.min_eigenvalue <= 1.0 / d + 1e-12);
      CHECK(level.min_eigenvalue >= -1e-12);
      CHECK((level.matrix - level.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}
