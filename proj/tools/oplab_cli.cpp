#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oplab/dynamic_programming.hpp"
#include "oplab/experiments.hpp"
#include "oplab/features.hpp"
#include "oplab/instances.hpp"
#include "oplab/lspe.hpp"
#include "oplab/sampling.hpp"
#include "oplab/serialization.hpp"
#include "oplab/shift.hpp"

namespace fs = std::filesystem;
using namespace oplab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct ProblemArgs {
  std::string input;
  std::string kind = "det";
  int d = 4;
  int horizon = 3;
  std::string r0 = "max";
  bool reduction = false;
};

struct Loaded {
  LayeredMdp mdp;
  FeatureMap phi;
  DataDistribution mu;
  Policy pi;
  double truth;
};

void add_problem_options(CLI::App* sub, ProblemArgs& a) {
  sub->add_option("--input,-i", a.input, "JSON document with features, mu and eval_policy sections");
  sub->add_option("--kind,-k", a.kind, "Built-in instance: det or sparse")->check(CLI::IsMember({"det", "sparse"}));
  sub->add_option("-d", a.d, "Feature dimension");
  sub->add_option("-H,--horizon", a.horizon, "Horizon");
  sub->add_option("--r0", a.r0, "r0: max, zero or a number");
}

Loaded load(const ProblemArgs& a) {
  if (!a.input.empty()) {
    Problem p = load_problem(a.input);
    if (!p.phi || !p.mu || !p.eval_policy)
      throw InvalidArgument(a.input + ": document needs features, mu and eval_policy sections");
    const double truth = exact_policy_value(p.mdp, *p.eval_policy);
    return {std::move(p.mdp), std::move(*p.phi), std::move(*p.mu), std::move(*p.eval_policy), truth};
  }
  const InstanceKind kind = parse_instance_kind(a.kind);
  auto b = build_instance(kind, a.d, a.horizon, R0Setting::parse(a.r0).resolve(kind, a.d, a.horizon));
  return {std::move(b.mdp), std::move(b.phi), std::move(b.mu), std::move(b.eval_policy), b.ground_truth_value};
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("error writing " + path);
}

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// ---- experiment configuration shared by the sweep-style subcommands ----

struct ConfigArgs {
  std::string config_path;
  std::string output_dir;
  ExperimentConfig flags;
  std::vector<std::string> r0;
  std::vector<CLI::Option*> set_by_flag;
};

void add_config_options(CLI::App* sub, ConfigArgs& c) {
  sub->add_option("--config,-c", c.config_path, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  sub->add_option("--output-dir,-o", c.output_dir, "Output directory (env OPLAB_OUTPUT_DIR overrides the config file)");
  auto& f = c.flags;
  c.set_by_flag = {
      sub->add_option("--instance", f.instance, "det, sparse or custom")->check(CLI::IsMember({"det", "sparse", "custom"})),
      sub->add_option("--custom", f.custom_path, "JSON document for --instance custom"),
      sub->add_option("--d", f.d_grid, "Grid over d")->delimiter(','),
      sub->add_option("--H", f.horizon_grid, "Grid over H")->delimiter(','),
      sub->add_option("--N", f.n_grid, "Grid over N (samples per level)")->delimiter(','),
      sub->add_option("--r0", c.r0, "Grid over r0 (max, zero or numbers)")->delimiter(','),
      sub->add_option("--lambda", f.lambda_grid, "Grid over the ridge parameter")->delimiter(','),
      sub->add_option("--trials,-T", f.trials, "Trials per grid point"),
      sub->add_option("--seed", f.seed, "Base seed"),
      sub->add_option("--delta", f.delta, "Failure probability for the upper bound"),
      sub->add_option("--epsilon", f.epsilon, "Uniform smoothing weight for on-policy data"),
      sub->add_option("--bootstrap", f.bootstrap, "Bootstrap replicates for the slope CI"),
      sub->add_option("--identity-trials", f.identity_trials, "Identity checks per grid point when lambda > 0"),
      sub->add_option("--threads,-j", f.threads, "Worker threads (output does not depend on this)"),
  };
}

ExperimentConfig resolve_config(const ConfigArgs& c) {
  ExperimentConfig config;
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw InvalidArgument("cannot read config " + c.config_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(c.config_path + ": " + e.what());
    }
    config = config_from_json(doc, config);
  }
  const auto given = [&](std::size_t i) { return c.set_by_flag[i]->count() > 0; };
  const auto& f = c.flags;
  if (given(0)) config.instance = f.instance;
  if (given(1)) config.custom_path = f.custom_path;
  if (given(2)) config.d_grid = f.d_grid;
  if (given(3)) config.horizon_grid = f.horizon_grid;
  if (given(4)) config.n_grid = f.n_grid;
  if (given(5)) {
    config.r0_grid.clear();
    for (const auto& r : c.r0) config.r0_grid.push_back(R0Setting::parse(r));
  }
  if (given(6)) config.lambda_grid = f.lambda_grid;
  if (given(7)) config.trials = f.trials;
  if (given(8)) config.seed = f.seed;
  if (given(9)) config.delta = f.delta;
  if (given(10)) config.epsilon = f.epsilon;
  if (given(11)) config.bootstrap = f.bootstrap;
  if (given(12)) config.identity_trials = f.identity_trials;
  if (given(13)) config.threads = f.threads;
  if (const char* env = std::getenv("OPLAB_OUTPUT_DIR"); env && *env) config.output_dir = env;
  if (!c.output_dir.empty()) config.output_dir = c.output_dir;
  config.validate();
  return config;
}

fs::path prepare_output(const ExperimentConfig& config) {
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

template <class Writer, class Rows>
fs::path write_csv(const fs::path& path, Writer writer, const Rows& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  writer(out, rows);
  out.close();
  if (!out) throw Error("error writing " + path.string());
  return path;
}

// ---- CSV readers used by `emit plots` ----

struct CsvTable {
  std::map<std::string, std::size_t> column;
  std::vector<std::vector<std::string>> rows;

  const std::string& at(std::size_t row, const std::string& name) const {
    const auto it = column.find(name);
    if (it == column.end()) throw InvalidArgument("missing column " + name);
    return rows[row].at(it->second);
  }
  double num(std::size_t row, const std::string& name) const {
    const auto& cell = at(row, name);
    if (cell == "nan") return std::nan("");
    if (cell == "inf") return INFINITY;
    return std::stod(cell);
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<CsvTable> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  const auto header = split(line);
  for (std::size_t i = 0; i < header.size(); ++i) table.column[header[i]] = i;
  while (std::getline(in, line))
    if (!line.empty()) table.rows.push_back(split(line));
  return table;
}

// ---- subcommands ----

int cmd_instance_build(const ProblemArgs& a, const std::string& out) {
  const InstanceKind kind = parse_instance_kind(a.kind);
  auto bundle = build_instance(kind, a.d, a.horizon, R0Setting::parse(a.r0).resolve(kind, a.d, a.horizon));
  const auto doc = a.reduction ? reduced_to_json(build_optimality_reduction(bundle)) : bundle_to_json(bundle);
  write_text(out, doc.dump(2) + "\n");
  return kExitOk;
}

int cmd_coverage(const ProblemArgs& a, std::optional<double> threshold, bool as_json) {
  const Loaded p = load(a);
  const double t = threshold.value_or(1.0 / p.phi.dim()) - kFeatureNormTolerance;
  const CoverageReport report = check_coverage(p.mu, p.phi, t);
  if (as_json) {
    std::cout << to_json(report).dump(2) << "\n";
  } else {
    std::printf("%-6s %-14s\n", "level", "sigma_min");
    for (std::size_t h = 0; h < report.min_eigenvalue.size(); ++h)
      std::printf("%-6zu %-14s\n", h + 1, fmt(report.min_eigenvalue[h]).c_str());
    for (const auto& v : report.violations) std::printf("violation at level %d: %s\n", v.level + 1, v.reason.c_str());
    std::printf("coverage %s\n", report.passed ? "ok" : "FAILED");
  }
  return report.passed ? kExitOk : kExitCheckFailed;
}

int cmd_realizability(const ProblemArgs& a, int policies, std::uint64_t seed, bool as_json) {
  const Loaded p = load(a);
  const RealizabilityReport report = fit_linear_q(p.mdp, p.pi, p.phi);
  const double spot = spot_check_realizability(p.mdp, p.phi, policies, seed);
  const bool ok = report.max_residual() < kRealizabilityTolerance && spot < kRealizabilityTolerance;
  if (as_json) {
    auto doc = to_json(report);
    doc["random_policy_max_residual"] = spot;
    doc["passed"] = ok;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::printf("%-6s %-14s %-14s\n", "level", "residual", "|theta|");
    for (std::size_t h = 0; h < report.residual.size(); ++h)
      std::printf("%-6zu %-14s %-14s\n", h + 1, fmt(report.residual[h]).c_str(), fmt(report.theta_norm[h]).c_str());
    std::printf("worst residual over %d random policies and all constant policies: %s\n", policies, fmt(spot).c_str());
    std::printf("realizability %s\n", ok ? "ok" : "FAILED");
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_lspe_run(const ProblemArgs& a, std::int64_t n, double lambda, std::uint64_t seed, std::uint64_t trial,
                 const std::string& data_path, const std::string& dump_path, bool as_json) {
  const Loaded p = load(a);
  OfflineDataset data = [&] {
    if (data_path.empty()) return sample_offline(p.mdp, p.mu, n, seed, trial);
    std::ifstream in(data_path);
    if (!in) throw InvalidArgument("cannot read " + data_path);
    return read_dataset_csv(in, p.mdp, p.mu, trial);
  }();
  if (!dump_path.empty()) {
    std::ofstream out(dump_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + dump_path);
    write_dataset_csv(out, std::span<const OfflineDataset>(&data, 1));
  }
  const LinearQEstimate est = run_lspe(data, p.pi, p.phi, lambda);
  if (as_json) {
    auto doc = to_json(est);
    doc["true_value"] = p.truth;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::printf("estimate   %s\ntrue value %s\nerror      %s\n", format_double(est.value).c_str(),
                format_double(p.truth).c_str(), format_double(est.value - p.truth).c_str());
  }
  return kExitOk;
}

int cmd_identity_check(const ProblemArgs& a, std::int64_t n, const std::vector<double>& lambdas, int seeds,
                       std::uint64_t seed, double tolerance) {
  const Loaded p = load(a);
  double worst = 0.0;
  std::printf("%-10s %-6s %-24s %-24s %-12s\n", "lambda", "trial", "lhs", "rhs", "rel_disc");
  for (double lambda : lambdas) {
    for (int t = 0; t < seeds; ++t) {
      const auto data = sample_offline(p.mdp, p.mu, n, seed, static_cast<std::uint64_t>(t));
      const IdentityReport r = check_error_identity(data, p.pi, p.phi, lambda, p.mdp);
      worst = std::max(worst, r.relative_discrepancy);
      std::printf("%-10s %-6d %-24s %-24s %-12s\n", fmt(lambda).c_str(), t, format_double(r.lhs).c_str(),
                  format_double(r.rhs).c_str(), fmt(r.relative_discrepancy).c_str());
    }
  }
  const bool ok = worst < tolerance;
  std::printf("max relative discrepancy %s (tolerance %s): %s\n", fmt(worst).c_str(), fmt(tolerance).c_str(),
              ok ? "ok" : "FAILED");
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_shift_report(const ProblemArgs& a, std::optional<double> epsilon, bool as_json) {
  const Loaded p = load(a);
  const DataDistribution mu = epsilon ? smoothed_on_policy(p.mdp, p.pi, *epsilon) : p.mu;
  const ShiftReport report = shift_report(p.mdp, mu, p.pi, p.phi);
  if (as_json) {
    std::cout << to_json(report).dump(2) << "\n";
    return kExitOk;
  }
  std::printf("%-6s %-14s %-14s %-14s\n", "h", "sigma_min", "C_h", "completeness");
  for (std::size_t h = 0; h < report.coefficient.size(); ++h)
    std::printf("%-6zu %-14s %-14s %-14s\n", h + 1, fmt(report.sigma_min[h]).c_str(), fmt(report.coefficient[h]).c_str(),
                h == 0 ? "-" : fmt(report.completeness[h]).c_str());
  std::printf("product of C_h: %s\n", fmt(report.product).c_str());
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& config) {
  const fs::path dir = prepare_output(config);
  const auto result = run_amplification_sweep(config);
  const auto rows = write_csv(dir / "amplification.csv", write_sweep_csv, std::span<const SweepRow>(result.rows));
  const auto slopes = write_csv(dir / "slopes.csv", write_slopes_csv, std::span<const SlopeFit>(result.slopes));
  std::printf("%-4s %-4s %-8s %-10s %-14s %-14s %-8s\n", "d", "H", "N", "lambda", "mean", "rmse", "failed");
  for (const auto& r : result.rows)
    std::printf("%-4d %-4d %-8lld %-10s %-14s %-14s %-8lld\n", r.d, r.horizon, static_cast<long long>(r.n),
                fmt(r.lambda).c_str(), fmt(r.mean).c_str(), fmt(r.rmse).c_str(), static_cast<long long>(r.failed));
  for (const auto& s : result.slopes)
    std::printf("slope d=%d N=%lld r0=%s lambda=%s: %s [%s, %s]\n", s.d, static_cast<long long>(s.n), s.r0.c_str(),
                fmt(s.lambda).c_str(), fmt(s.slope).c_str(), fmt(s.ci_low).c_str(), fmt(s.ci_high).c_str());
  std::printf("wrote %s and %s\n", rows.string().c_str(), slopes.string().c_str());
  double wall = 0.0;
  for (const auto& r : result.rows) wall += r.wall_seconds;
  std::fprintf(stderr, "sweep wall time %.2f s\n", wall);
  return kExitOk;
}

int cmd_distinguish(const ExperimentConfig& config) {
  if (config.instance == "custom") throw InvalidArgument("the distinguishing test needs a built-in instance");
  const fs::path dir = prepare_output(config);
  const InstanceKind kind = parse_instance_kind(config.instance);
  std::vector<DistinguishResult> rows;
  for (int d : config.d_grid)
    for (int H : config.horizon_grid)
      for (std::int64_t n : config.n_grid)
        rows.push_back(run_distinguishing_test(kind, d, H, n, config.trials, config.seed, config.threads));
  const auto path = write_csv(dir / "distinguish.csv", write_distinguish_csv, std::span<const DistinguishResult>(rows));
  for (const auto& r : rows)
    std::printf("d=%d H=%d N=%lld success %s [%s, %s]\n", r.d, r.horizon, static_cast<long long>(r.n),
                fmt(r.success).c_str(), fmt(r.ci_low).c_str(), fmt(r.ci_high).c_str());
  std::printf("wrote %s\n", path.string().c_str());
  return kExitOk;
}

int cmd_upper_bound(const ExperimentConfig& config) {
  const fs::path dir = prepare_output(config);
  const auto rows = run_upper_bound_check(config);
  const auto path = write_csv(dir / "upper_bound.csv", write_upper_bound_csv, std::span<const UpperBoundRow>(rows));
  bool ok = true;
  for (const auto& r : rows) {
    ok = ok && r.pass;
    std::printf("d=%d H=%d N=%lld q%.0f sq error %s bound %s %s\n", r.d, r.horizon, static_cast<long long>(r.n),
                100.0 * (1.0 - r.delta), fmt(r.quantile_sq_error).c_str(), fmt(r.bound).c_str(),
                r.vacuous ? "(bound vacuous)" : (r.pass ? "ok" : "FAILED"));
  }
  std::printf("wrote %s\n", path.string().c_str());
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_emit_plots(const ExperimentConfig& config, const std::string& plots_dir) {
  const fs::path dir(config.output_dir);
  std::vector<SweepRow> sweep;
  std::vector<DistinguishResult> distinguish;
  std::vector<UpperBoundRow> upper;
  if (auto t = read_csv(dir / "amplification.csv")) {
    for (std::size_t i = 0; i < t->rows.size(); ++i) {
      SweepRow r;
      r.d = static_cast<int>(t->num(i, "d"));
      r.horizon = static_cast<int>(t->num(i, "H"));
      r.n = std::stoll(t->at(i, "N"));
      r.r0 = t->num(i, "r0");
      r.lambda = t->num(i, "lambda");
      r.rmse = t->num(i, "rmse");
      r.seed = std::stoull(t->at(i, "seed"));
      sweep.push_back(r);
    }
  }
  if (auto t = read_csv(dir / "distinguish.csv")) {
    for (std::size_t i = 0; i < t->rows.size(); ++i) {
      DistinguishResult r;
      r.kind = parse_instance_kind(t->at(i, "kind"));
      r.d = static_cast<int>(t->num(i, "d"));
      r.horizon = static_cast<int>(t->num(i, "H"));
      r.n = std::stoll(t->at(i, "N"));
      r.trials = std::stoll(t->at(i, "trials"));
      r.success = t->num(i, "success");
      r.ci_low = t->num(i, "ci_low");
      r.ci_high = t->num(i, "ci_high");
      r.seed = std::stoull(t->at(i, "seed"));
      distinguish.push_back(r);
    }
  }
  if (auto t = read_csv(dir / "upper_bound.csv")) {
    for (std::size_t i = 0; i < t->rows.size(); ++i) {
      UpperBoundRow r;
      r.d = static_cast<int>(t->num(i, "d"));
      r.horizon = static_cast<int>(t->num(i, "H"));
      r.n = std::stoll(t->at(i, "N"));
      r.quantile_sq_error = t->num(i, "quantile_sq_error");
      r.bound = t->num(i, "bound");
      upper.push_back(r);
    }
  }
  const fs::path target = plots_dir.empty() ? dir / "plots" : fs::path(plots_dir);
  for (const auto& path : emit_plot_data({sweep, distinguish, upper}, target)) std::printf("wrote %s\n", path.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oplab: offline policy evaluation laboratory"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  ProblemArgs problem;
  bool as_json = false;

  auto* instance = app.add_subcommand("instance", "Hard instance construction")->require_subcommand(1);
  auto* build = instance->add_subcommand("build", "Build a hard instance and write it as JSON");
  std::string build_out;
  build->add_option("--kind,-k", problem.kind, "det or sparse")->check(CLI::IsMember({"det", "sparse"}));
  build->add_option("-d", problem.d, "Feature dimension");
  build->add_option("-H,--horizon", problem.horizon, "Horizon");
  build->add_option("--r0", problem.r0, "r0: max, zero or a number");
  build->add_flag("--reduction", problem.reduction, "Wrap the instance in the policy-optimization reduction");
  build->add_option("--out,-o", build_out, "Output file (default stdout)");

  auto* coverage = app.add_subcommand("coverage", "Minimum eigenvalue of the data covariance per level");
  add_problem_options(coverage, problem);
  std::optional<double> threshold;
  coverage->add_option("--threshold", threshold, "Required minimum eigenvalue (default 1/d)");
  coverage->add_flag("--json", as_json);

  auto* realizability = app.add_subcommand("realizability", "Least-squares fit of Q^pi on the features");
  add_problem_options(realizability, problem);
  int policies = 20;
  std::uint64_t seed = 1;
  realizability->add_option("--policies", policies, "Random policies for the spot check");
  realizability->add_option("--seed", seed, "Seed for the random policies");
  realizability->add_flag("--json", as_json);

  auto* lspe = app.add_subcommand("lspe", "Least-squares policy evaluation")->require_subcommand(1);
  auto* lspe_run = lspe->add_subcommand("run", "Sample a dataset (or read one) and run LSPE");
  add_problem_options(lspe_run, problem);
  std::int64_t n = 1000;
  double lambda = 0.0;
  std::uint64_t trial = 0;
  std::string data_path;
  std::string dump_path;
  lspe_run->add_option("--N,-N", n, "Samples per level");
  lspe_run->add_option("--lambda", lambda, "Ridge parameter");
  lspe_run->add_option("--seed", seed, "Sampling seed");
  lspe_run->add_option("--trial", trial, "Trial index within the seed");
  lspe_run->add_option("--data", data_path, "Dataset CSV instead of sampling")->check(CLI::ExistingFile);
  lspe_run->add_option("--dump-data", dump_path, "Write the dataset used to this CSV");
  lspe_run->add_flag("--json", as_json);

  auto* identity = app.add_subcommand("identity", "Exact error identity")->require_subcommand(1);
  auto* identity_check = identity->add_subcommand("check", "Compare both sides of the error identity");
  add_problem_options(identity_check, problem);
  std::vector<double> lambdas{0.1, 1.0, 10.0};
  int seeds = 50;
  double tolerance = 1e-8;
  identity_check->add_option("--N,-N", n, "Samples per level");
  identity_check->add_option("--lambda", lambdas, "Ridge parameters (> 0)")->delimiter(',');
  identity_check->add_option("--trials", seeds, "Datasets per lambda");
  identity_check->add_option("--seed", seed, "Sampling seed");
  identity_check->add_option("--tolerance", tolerance, "Maximum relative discrepancy");

  auto* shift = app.add_subcommand("shift", "Distribution shift diagnostics")->require_subcommand(1);
  auto* shift_rep = shift->add_subcommand("report", "Per-level sigma_min, C_h and completeness residual");
  add_problem_options(shift_rep, problem);
  std::optional<double> epsilon;
  shift_rep->add_option("--on-policy", epsilon, "Replace mu by on-policy data smoothed with this uniform weight");
  shift_rep->add_flag("--json", as_json);

  ConfigArgs sweep_args;
  ConfigArgs distinguish_args;
  ConfigArgs bound_args;
  ConfigArgs plot_args;
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweeps")->require_subcommand(1);
  auto* amplification = sweep->add_subcommand("amplification", "LSPE error across H, N, r0 and lambda");
  add_config_options(amplification, sweep_args);
  auto* test = app.add_subcommand("test", "Hypothesis tests")->require_subcommand(1);
  auto* distinguish = test->add_subcommand("distinguish", "Likelihood-ratio test between r0 = 0 and the maximal r0");
  add_config_options(distinguish, distinguish_args);
  auto* check = app.add_subcommand("check", "Empirical checks of error bounds")->require_subcommand(1);
  auto* upper = check->add_subcommand("upperbound", "Empirical error quantile against the closed-form bound");
  add_config_options(upper, bound_args);
  auto* emit = app.add_subcommand("emit", "Plot data")->require_subcommand(1);
  auto* plots = emit->add_subcommand("plots", "Tidy CSV for the figures from results in the output directory");
  add_config_options(plots, plot_args);
  std::string plots_dir;
  plots->add_option("--plots-dir", plots_dir, "Destination (default <output-dir>/plots)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*build) return cmd_instance_build(problem, build_out);
    if (*coverage) return cmd_coverage(problem, threshold, as_json);
    if (*realizability) return cmd_realizability(problem, policies, seed, as_json);
    if (*lspe_run) return cmd_lspe_run(problem, n, lambda, seed, trial, data_path, dump_path, as_json);
    if (*identity_check) return cmd_identity_check(problem, n, lambdas, seeds, seed, tolerance);
    if (*shift_rep) return cmd_shift_report(problem, epsilon, as_json);
    if (*amplification) return cmd_sweep(resolve_config(sweep_args));
    if (*distinguish) return cmd_distinguish(resolve_config(distinguish_args));
    if (*upper) return cmd_upper_bound(resolve_config(bound_args));
    if (*plots) return cmd_emit_plots(resolve_config(plot_args), plots_dir);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}
