#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "oplab/instances.hpp"
#include "oplab/mdp.hpp"
#include "oplab/rng.hpp"

namespace oplab {

// r0 on a grid: the instance's maximum (which depends on d and H), zero, or
// a literal value.
struct R0Setting {
  enum class Mode { Max, Zero, Value };
  Mode mode = Mode::Max;
  double value = 0.0;

  static R0Setting parse(const std::string& text);
  double resolve(InstanceKind kind, int d, int horizon) const;
  std::string label() const;
};

struct ExperimentConfig {
  std::string instance = "det";  // det | sparse | custom
  std::string custom_path;       // JSON document when instance == custom
  std::vector<int> d_grid{4};
  std::vector<int> horizon_grid{2, 3, 4, 5, 6, 7, 8};
  std::vector<std::int64_t> n_grid{1000};
  std::vector<R0Setting> r0_grid{R0Setting{}};
  std::vector<double> lambda_grid{0.0};
  std::int64_t trials = 200;
  std::uint64_t seed = 1;
  std::string output_dir = "oplab-out";
  double delta = 0.1;
  double epsilon = 0.05;  // uniform smoothing of on-policy data
  int bootstrap = 1000;
  int identity_trials = 10;  // identity checks per grid point when lambda > 0
  int threads = 1;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base = {});
nlohmann::json to_json(const ExperimentConfig& config);

struct SweepRow {
  int d = 0;
  int horizon = 0;
  std::int64_t n = 0;
  double r0 = 0.0;
  double lambda = 0.0;
  std::int64_t trials = 0;  // successful trials
  std::int64_t failed = 0;  // singular designs, excluded
  double mean = 0.0;
  double variance = 0.0;  // population variance over successful trials
  double rmse = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
  std::uint64_t seed = 0;
  double ground_truth = 0.0;
  double max_identity_discrepancy = 0.0;  // NaN when lambda == 0
  double wall_seconds = 0.0;
  std::vector<double> estimates;  // per successful trial, in trial order
};

struct SlopeFit {
  int d = 0;
  std::int64_t n = 0;
  std::string r0;
  double lambda = 0.0;
  int points = 0;
  double slope = 0.0;  // OLS slope of log RMSE against H
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct AmplificationResult {
  std::vector<SweepRow> rows;
  std::vector<SlopeFit> slopes;
};

// T independent datasets per grid point, LSPE on each, aggregate V-hat.
AmplificationResult run_amplification_sweep(const ExperimentConfig& config);

struct DistinguishResult {
  InstanceKind kind = InstanceKind::Deterministic;
  int d = 0;
  int horizon = 0;
  std::int64_t n = 0;
  std::int64_t trials = 0;
  std::int64_t correct = 0;
  double success = 0.0;
  double ci_low = 0.0;  // Wilson 95%
  double ci_high = 0.0;
  std::uint64_t seed = 0;
};

// Counts +1 outcomes among the samples whose law depends on r0: last-level
// rewards (det) or s_H^+ successors of the level H-1 states s^c (sparse).
struct SufficientStatistic {
  std::int64_t plus = 0;
  std::int64_t count = 0;
};
SufficientStatistic distinguishing_statistic(InstanceKind kind, int d, const OfflineDataset& data,
                                             const LayeredMdp& mdp);

// Bayes decision between Bernoulli(1/2) and Bernoulli((1 + gap) / 2) under a
// uniform prior; ties go to a fair coin from tie_breaker.
bool likelihood_ratio_picks_alternative(const SufficientStatistic& stat, double gap, Rng& tie_breaker);

// Each trial draws the world r0 in {0, max}, samples N tuples per level from
// it (N = 0 means no data), and classifies with the likelihood-ratio test.
DistinguishResult run_distinguishing_test(InstanceKind kind, int d, int horizon, std::int64_t n, std::int64_t trials,
                                          std::uint64_t seed, int threads = 1);

struct UpperBoundRow {
  int d = 0;
  int horizon = 0;
  std::int64_t n = 0;
  double r0 = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  double lambda = 0.0;
  std::int64_t trials = 0;
  std::int64_t failed = 0;
  double quantile_sq_error = 0.0;  // empirical (1 - delta) quantile
  double mean_sq_error = 0.0;
  double product_c = 0.0;
  double bound = 0.0;
  bool vacuous = false;
  bool pass = false;
  std::uint64_t seed = 0;
};

// (1 - eps) * on-policy occupancy of pi + eps * uniform over every
// state-action pair of the level.
DataDistribution smoothed_on_policy(const LayeredMdp& mdp, const Policy& pi, double epsilon);

std::vector<UpperBoundRow> run_upper_bound_check(const ExperimentConfig& config);

// CSV writers; numbers go through format_double so output is byte-stable.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_slopes_csv(std::ostream& out, std::span<const SlopeFit> slopes);
void write_distinguish_csv(std::ostream& out, std::span<const DistinguishResult> rows);
void write_upper_bound_csv(std::ostream& out, std::span<const UpperBoundRow> rows);

struct PlotInputs {
  std::span<const SweepRow> amplification;
  std::span<const DistinguishResult> distinguishing;
  std::span<const UpperBoundRow> upper_bound;
};

// Writes rmse_vs_H.csv, success_vs_N.csv and bound_vs_empirical.csv (tidy,
// one observation per row) into dir and returns their paths.
std::vector<std::filesystem::path> emit_plot_data(const PlotInputs& inputs, const std::filesystem::path& dir);

// Type-7 (linear interpolation) sample quantile of unsorted data.
double quantile(std::vector<double> values, double q);

}  // namespace oplab
