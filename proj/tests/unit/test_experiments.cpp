#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "../support/binomial_oracle.hpp"
#include "oplab/dynamic_programming.hpp"
#include "oplab/experiments.hpp"
#include "oplab/lspe.hpp"
#include "oplab/sampling.hpp"
#include "oplab/serialization.hpp"

using namespace oplab;
using namespace oplab::testing;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.d_grid = {4};
  c.horizon_grid = {2, 3};
  c.n_grid = {50};
  c.trials = 100;
  c.bootstrap = 50;
  c.identity_trials = 2;
  c.seed = 77;
  return c;
}

std::string sweep_csv(const AmplificationResult& r) {
  std::ostringstream out;
  write_sweep_csv(out, r.rows);
  write_slopes_csv(out, r.slopes);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("oplab_test_" + name);
  fs::remove_all(dir);
  return dir;
}

double binomial_sd(double p, double n) { return std::sqrt(std::max(p * (1.0 - p), 1e-4) / n); }

}  // namespace

TEST_CASE("r0 settings") {
  CHECK(R0Setting::parse("max").mode == R0Setting::Mode::Max);
  CHECK(R0Setting::parse("zero").mode == R0Setting::Mode::Zero);
  CHECK(R0Setting::parse("0").mode == R0Setting::Mode::Zero);
  const auto v = R0Setting::parse("0.125");
  CHECK(v.mode == R0Setting::Mode::Value);
  CHECK(v.value == 0.125);
  CHECK_THROWS_AS(R0Setting::parse("big"), InvalidArgument);
  CHECK(R0Setting{}.resolve(InstanceKind::Deterministic, 4, 6) == max_r0(InstanceKind::Deterministic, 4, 6));
  CHECK(R0Setting::parse("zero").resolve(InstanceKind::Sparse, 6, 5) == 0.0);
  CHECK(v.resolve(InstanceKind::Deterministic, 4, 2) == 0.125);
  CHECK(R0Setting{}.label() == "max");
  CHECK(R0Setting::parse("zero").label() == "zero");
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(ExperimentConfig{}.validate());
  const auto rejects = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  };
  rejects([](ExperimentConfig& c) { c.instance = "weird"; });
  rejects([](ExperimentConfig& c) { c.instance = "custom"; });
  rejects([](ExperimentConfig& c) { c.d_grid.clear(); });
  rejects([](ExperimentConfig& c) { c.horizon_grid.clear(); });
  rejects([](ExperimentConfig& c) { c.n_grid = {-1}; });
  rejects([](ExperimentConfig& c) { c.trials = 0; });
  rejects([](ExperimentConfig& c) { c.lambda_grid = {-0.5}; });
  rejects([](ExperimentConfig& c) { c.delta = 1.0; });
  rejects([](ExperimentConfig& c) { c.delta = 0.0; });
  rejects([](ExperimentConfig& c) { c.epsilon = 0.0; });
  rejects([](ExperimentConfig& c) { c.threads = 0; });
  rejects([](ExperimentConfig& c) { c.bootstrap = -1; });
  rejects([](ExperimentConfig& c) { c.d_grid = {5}; });
  rejects([](ExperimentConfig& c) { c.horizon_grid = {0}; });
  rejects([](ExperimentConfig& c) { c.r0_grid = {R0Setting::parse("0.9")}; });
}

TEST_CASE("config JSON round trip and overrides") {
  ExperimentConfig c = small_config();
  c.r0_grid = {R0Setting{}, R0Setting::parse("zero"), R0Setting::parse("0.01")};
  c.lambda_grid = {0.0, 2.5};
  c.threads = 3;
  const auto doc = to_json(c);
  CHECK(to_json(config_from_json(doc)) == doc);

  const auto partial = nlohmann::json::parse(R"({"H": [4], "N": 12, "r0": "zero"})");
  const auto merged = config_from_json(partial, c);
  CHECK(merged.horizon_grid == std::vector<int>{4});
  CHECK(merged.n_grid == std::vector<std::int64_t>{12});
  CHECK(merged.r0_grid.size() == 1);
  CHECK(merged.seed == c.seed);
  CHECK_THROWS(config_from_json(nlohmann::json::parse(R"({"trials": "many"})")));
}

TEST_CASE("type-7 quantiles") {
  CHECK(quantile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(quantile({4, 1, 3, 2}, 0.05) == doctest::Approx(1.15));
  CHECK(quantile({4, 1, 3, 2}, 1.0) == 4.0);
  CHECK(quantile({7}, 0.3) == 7.0);
  CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("sweep rows are internally consistent") {
  auto c = small_config();
  c.lambda_grid = {0.0, 1.0};
  const auto result = run_amplification_sweep(c);
  REQUIRE(result.rows.size() == 4);
  for (const auto& row : result.rows) {
    REQUIRE(row.estimates.size() == static_cast<std::size_t>(row.trials));
    CHECK(row.trials + row.failed == c.trials);
    const double n = static_cast<double>(row.estimates.size());
    const double mean = std::accumulate(row.estimates.begin(), row.estimates.end(), 0.0) / n;
    CHECK(row.mean == doctest::Approx(mean).epsilon(1e-12));
    const double bias = row.mean - row.ground_truth;
    CHECK(std::abs(row.rmse * row.rmse - (bias * bias + row.variance)) < 1e-9);
    CHECK(row.q50 == quantile(row.estimates, 0.5));
    CHECK(row.q05 <= row.q50);
    CHECK(row.q50 <= row.q95);
    CHECK(row.ground_truth == doctest::Approx(1.0).epsilon(1e-10));
    if (row.lambda > 0.0) {
      CHECK(row.max_identity_discrepancy < 1e-8);
    } else {
      CHECK(std::isnan(row.max_identity_discrepancy));
    }
  }
  // One slope per (N, r0, lambda) group.
  CHECK(result.slopes.size() == 2);
  for (const auto& s : result.slopes) {
    CHECK(s.points == 2);
    CHECK(s.ci_low <= s.ci_high);
  }

  auto bad = c;
  bad.n_grid = {0};
  CHECK_THROWS_AS(run_amplification_sweep(bad), InvalidArgument);
}

TEST_CASE("RMSE scales like N^-1/2 at the shortest horizon") {
  auto c = small_config();
  c.horizon_grid = {2};
  c.n_grid = {100, 400};
  c.trials = 400;
  c.bootstrap = 0;
  const auto rows = run_amplification_sweep(c).rows;
  REQUIRE(rows.size() == 2);
  const double ratio = rows[0].rmse / rows[1].rmse;
  CHECK(ratio > 1.0);
  CHECK(ratio < 4.0);
}

TEST_CASE("the estimator is centred at zero when r0 = 0") {
  auto c = small_config();
  c.horizon_grid = {4};
  c.r0_grid = {R0Setting::parse("zero")};
  c.n_grid = {200};
  c.trials = 500;
  const auto row = run_amplification_sweep(c).rows.at(0);
  CHECK(row.ground_truth == 0.0);
  const double se = std::sqrt(row.variance / static_cast<double>(row.trials));
  CHECK(std::abs(row.mean) <= 4.0 * se + 1e-15);
}

TEST_CASE("thread count does not change results") {
  auto c = small_config();
  const auto one = sweep_csv(run_amplification_sweep(c));
  c.threads = 2;
  CHECK(sweep_csv(run_amplification_sweep(c)) == one);

  const auto a = run_distinguishing_test(InstanceKind::Deterministic, 4, 4, 30, 200, 5, 1);
  const auto b = run_distinguishing_test(InstanceKind::Deterministic, 4, 4, 30, 200, 5, 3);
  CHECK(a.correct == b.correct);

  auto u = small_config();
  u.n_grid = {200};
  u.trials = 40;
  std::ostringstream x, y;
  write_upper_bound_csv(x, run_upper_bound_check(u));
  u.threads = 2;
  write_upper_bound_csv(y, run_upper_bound_check(u));
  CHECK(x.str() == y.str());
}

TEST_CASE("likelihood-ratio decision rule") {
  Rng coin(1);
  CHECK(likelihood_ratio_picks_alternative({5, 5}, 0.1, coin));
  CHECK_FALSE(likelihood_ratio_picks_alternative({0, 5}, 0.1, coin));
  CHECK_FALSE(likelihood_ratio_picks_alternative({2, 5}, 0.1, coin));
  // The threshold is log(1/0.9) / log(1.1/0.9) = 0.525 of n.
  CHECK(likelihood_ratio_picks_alternative({53, 100}, 0.1, coin));
  CHECK_FALSE(likelihood_ratio_picks_alternative({52, 100}, 0.1, coin));
  int alt = 0;
  for (int i = 0; i < 400; ++i) alt += likelihood_ratio_picks_alternative({0, 0}, 0.1, coin);
  CHECK(alt > 150);
  CHECK(alt < 250);
}

TEST_CASE("the informative samples follow the stated laws") {
  for (auto kind : {InstanceKind::Deterministic, InstanceKind::Sparse}) {
    const int d = kind == InstanceKind::Deterministic ? 4 : 6;
    const int H = 5;
    const auto null_world = build_instance(kind, d, H, 0.0);
    const auto alt_world = build_instance(kind, d, H, max_r0(kind, d, H));
    const auto l0 = informative_law(null_world);
    const auto l1 = informative_law(alt_world);
    CHECK(l0.mass == doctest::Approx(l1.mass));
    CHECK(l0.plus == doctest::Approx(0.5));
    CHECK(l1.plus == doctest::Approx(0.5 * (1.0 + alt_world.r0)));

    const std::int64_t N = 20000;
    const auto data = sample_offline(alt_world.mdp, alt_world.mu, N, 3, 0);
    const auto stat = distinguishing_statistic(kind, d, data, alt_world.mdp);
    const double frac = static_cast<double>(stat.count) / static_cast<double>(N);
    CHECK(std::abs(frac - l1.mass) < 4.0 * binomial_sd(l1.mass, static_cast<double>(N)));
    const double plus = static_cast<double>(stat.plus) / static_cast<double>(stat.count);
    CHECK(std::abs(plus - l1.plus) < 4.0 * binomial_sd(l1.plus, static_cast<double>(stat.count)));
  }
}

TEST_CASE("distinguishing success matches the exact binomial oracle") {
  const std::int64_t T = 2000;
  struct Case {
    InstanceKind kind;
    int d, H;
    std::int64_t n;
  };
  for (const auto& k : {Case{InstanceKind::Deterministic, 4, 6, 0}, Case{InstanceKind::Deterministic, 4, 6, 10},
                        Case{InstanceKind::Deterministic, 4, 6, 300}, Case{InstanceKind::Deterministic, 4, 4, 50},
                        Case{InstanceKind::Sparse, 6, 5, 40}, Case{InstanceKind::Sparse, 6, 6, 200}}) {
    CAPTURE(k.n);
    CAPTURE(k.H);
    const double exact = exact_lrt_success(k.kind, k.d, k.H, k.n);
    const auto got = run_distinguishing_test(k.kind, k.d, k.H, k.n, T, 11);
    CHECK(std::abs(got.success - exact) < 4.0 * binomial_sd(exact, static_cast<double>(T)));
    CHECK(got.ci_low <= got.success);
    CHECK(got.success <= got.ci_high);
    CHECK(got.ci_low >= 0.0);
    CHECK(got.ci_high <= 1.0);
  }
  const auto blind = run_distinguishing_test(InstanceKind::Deterministic, 4, 6, 0, T, 2);
  CHECK(blind.ci_low <= 0.5);
  CHECK(blind.ci_high >= 0.5);
  CHECK_THROWS_AS(run_distinguishing_test(InstanceKind::Deterministic, 4, 6, -1, T, 2), InvalidArgument);
}

TEST_CASE("distinguishing success is non-decreasing in N") {
  const std::int64_t T = 1000;
  double previous = 0.0;
  for (std::int64_t n : {0, 10, 100, 1000}) {
    const auto r = run_distinguishing_test(InstanceKind::Deterministic, 4, 5, n, T, 9);
    CHECK(r.success >= previous - 2.0 * binomial_sd(previous, static_cast<double>(T)));
    previous = r.success;
  }
  // The oracle itself is monotone.
  double last = 0.0;
  for (std::int64_t n : {0, 1, 2, 5, 10, 50, 200, 1000}) {
    const double e = exact_lrt_success(InstanceKind::Deterministic, 4, 6, n);
    CHECK(e >= last - 1e-12);
    last = e;
  }
}

TEST_CASE("smoothed on-policy distributions") {
  const auto det = build_det_instance(4, 4, 0.1);
  const auto occ = marginal_occupancy(det.mdp, det.eval_policy);
  for (double eps : {0.0, 0.05, 1.0}) {
    const auto mu = smoothed_on_policy(det.mdp, det.eval_policy, eps);
    for (int h = 0; h < 4; ++h) {
      double total = 0.0;
      for (const auto& atom : mu.level(h)) {
        total += atom.prob;
        const double floor = eps / (det.mdp.level_size(h) * 2.0);
        const double on = occ[atom.state] * det.eval_policy.prob(atom.state, atom.action);
        CHECK(atom.prob == doctest::Approx((1.0 - eps) * on + floor).epsilon(1e-12));
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      if (eps == 1.0) CHECK(mu.level(h).size() == static_cast<std::size_t>(det.mdp.level_size(h) * 2));
    }
  }
  CHECK_THROWS_AS(smoothed_on_policy(det.mdp, det.eval_policy, 1.5), InvalidArgument);
}

TEST_CASE("upper-bound rows") {
  auto c = small_config();
  c.horizon_grid = {3};
  c.n_grid = {100, 1000};
  c.trials = 60;
  const auto rows = run_upper_bound_check(c);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.trials + r.failed == c.trials);
    CHECK(r.pass == (r.vacuous || r.quantile_sq_error <= r.bound));
    CHECK(r.product_c >= 1.0);
    CHECK(r.quantile_sq_error >= 0.0);
  }
  CHECK(rows[1].bound < rows[0].bound);
  CHECK(rows[0].product_c == rows[1].product_c);

  // Doubling any coefficient never lowers the bound.
  Rng gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> cs(3);
    for (auto& x : cs) x = 1.0 + 5.0 * gen.uniform();
    const auto base = evaluate_theorem_bound(cs, 4, 3, 1000.0, 0.1);
    cs[gen.below(3)] *= 2.0;
    CHECK(evaluate_theorem_bound(cs, 4, 3, 1000.0, 0.1).bound >= base.bound);
  }
}

TEST_CASE("custom instances run through the sweep") {
  const fs::path dir = scratch_dir("custom");
  fs::create_directories(dir);
  const auto det = build_det_instance(4, 3, 0.2);
  {
    std::ofstream out(dir / "inst.json");
    out << bundle_to_json(det).dump();
  }
  auto c = small_config();
  c.instance = "custom";
  c.custom_path = (dir / "inst.json").string();
  c.trials = 20;
  const auto result = run_amplification_sweep(c);
  REQUIRE(result.rows.size() == 1);
  CHECK(result.rows[0].horizon == 3);
  CHECK(result.rows[0].ground_truth == doctest::Approx(det.ground_truth_value));
  c.custom_path = (dir / "missing.json").string();
  CHECK_THROWS(run_amplification_sweep(c));
}

TEST_CASE("plot data files") {
  const fs::path empty_dir = scratch_dir("plots_empty");
  const auto files = emit_plot_data({}, empty_dir);
  REQUIRE(files.size() == 3);
  for (const auto& f : files) CHECK(line_count(slurp(f)) == 1);

  auto c = small_config();
  c.horizon_grid = {2, 3, 4};
  c.n_grid = {40, 80};
  c.trials = 20;
  c.bootstrap = 10;
  const auto sweep = run_amplification_sweep(c);
  const std::vector<DistinguishResult> dist{run_distinguishing_test(InstanceKind::Deterministic, 4, 3, 10, 50, 1)};
  auto u = c;
  u.horizon_grid = {2};
  const auto ub = run_upper_bound_check(u);

  const fs::path a = scratch_dir("plots_a"), b = scratch_dir("plots_b");
  const auto fa = emit_plot_data({sweep.rows, dist, ub}, a);
  const auto fb = emit_plot_data({sweep.rows, dist, ub}, b);
  for (std::size_t i = 0; i < fa.size(); ++i) CHECK(slurp(fa[i]) == slurp(fb[i]));
  CHECK(line_count(slurp(a / "rmse_vs_H.csv")) == 1 + c.horizon_grid.size() * c.n_grid.size());
  CHECK(line_count(slurp(a / "success_vs_N.csv")) == 2);
  CHECK(line_count(slurp(a / "bound_vs_empirical.csv")) == 1 + 2 * ub.size());

  // A file where the directory should be surfaces the path.
  const fs::path blocked = scratch_dir("plots_blocked");
  { std::ofstream(blocked.string()) << "x"; }
  try {
    emit_plot_data({}, blocked / "sub");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("plots_blocked") != std::string::npos);
  }
}
