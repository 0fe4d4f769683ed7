#include "oplab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "oplab/dynamic_programming.hpp"
#include "oplab/lspe.hpp"
#include "oplab/sampling.hpp"
#include "oplab/serialization.hpp"
#include "oplab/shift.hpp"

namespace oplab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Replicate b of the bootstrap draws from stream (row seed, auxiliary, b + offset).
constexpr std::uint64_t kBootstrapTrialOffset = 1ULL << 40;

// Runs body(t) for t in [0, trials). Each trial owns its outputs by index, so
// results do not depend on how trials are scheduled.
template <class Body>
void for_each_trial(std::int64_t trials, int threads, Body&& body) {
  if (threads <= 1 || trials < 2) {
    for (std::int64_t t = 0; t < trials; ++t) body(t);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    const auto workers = static_cast<int>(std::min<std::int64_t>(threads, trials));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::int64_t t = next++; t < trials; t = next++) {
          try {
            body(t);
          } catch (...) {
            const std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

std::uint64_t point_seed(std::uint64_t seed, int d, int horizon, std::int64_t n) {
  return derive_seed(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(d)), static_cast<std::uint64_t>(horizon)),
                     static_cast<std::uint64_t>(n));
}

struct Prepared {
  int d;
  int horizon;
  double r0;
  std::string r0_label;
  LayeredMdp mdp;
  FeatureMap phi;
  DataDistribution mu;
  Policy pi;
  double truth;
};

std::vector<Prepared> prepare(const ExperimentConfig& config) {
  std::vector<Prepared> out;
  if (config.instance == "custom") {
    Problem p = load_problem(config.custom_path);
    if (!p.phi || !p.mu || !p.eval_policy) throw InvalidArgument(config.custom_path + ": custom instances need features, mu and eval_policy");
    const double truth = exact_policy_value(p.mdp, *p.eval_policy);
    const int H = p.mdp.horizon();
    const int d = p.phi->dim();
    out.push_back({d, H, p.instance.value("r0", kNaN), "custom", std::move(p.mdp), std::move(*p.phi), std::move(*p.mu),
                   std::move(*p.eval_policy), truth});
    return out;
  }
  const InstanceKind kind = parse_instance_kind(config.instance);
  for (int d : config.d_grid) {
    for (int H : config.horizon_grid) {
      for (const auto& r0 : config.r0_grid) {
        auto b = build_instance(kind, d, H, r0.resolve(kind, d, H));
        out.push_back({d, H, b.r0, r0.label(), std::move(b.mdp), std::move(b.phi), std::move(b.mu),
                       std::move(b.eval_policy), b.ground_truth_value});
      }
    }
  }
  return out;
}

double wilson_half_width(double p, double n, double z) {
  return z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / (1.0 + z * z / n);
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

double rmse_of(std::span<const double> values, double truth) {
  double acc = 0.0;
  for (double v : values) acc += (v - truth) * (v - truth);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

std::vector<SlopeFit> fit_slopes(const std::vector<SweepRow>& rows, const std::vector<std::string>& r0_labels,
                                 int bootstrap) {
  // Group by (d, N, r0 label, lambda) in order of first appearance.
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::tuple<int, std::int64_t, std::string, double>> keys;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto key = std::make_tuple(rows[i].d, rows[i].n, r0_labels[i], rows[i].lambda);
    const auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      groups.push_back({i});
    } else {
      groups[static_cast<std::size_t>(it - keys.begin())].push_back(i);
    }
  }

  std::vector<SlopeFit> fits;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<std::size_t> usable;
    for (std::size_t i : groups[g])
      if (rows[i].trials > 0 && std::isfinite(rows[i].rmse) && rows[i].rmse > 0.0) usable.push_back(i);
    std::vector<double> hs;
    for (std::size_t i : usable) hs.push_back(rows[i].horizon);
    std::sort(hs.begin(), hs.end());
    if (std::unique(hs.begin(), hs.end()) - hs.begin() < 2) continue;

    SlopeFit fit;
    std::tie(fit.d, fit.n, fit.r0, fit.lambda) = keys[g];
    fit.points = static_cast<int>(usable.size());
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i : usable) {
      x.push_back(rows[i].horizon);
      y.push_back(std::log(rows[i].rmse));
    }
    fit.slope = ols_slope(x, y);

    std::vector<double> replicates;
    std::vector<double> resampled;
    for (int b = 0; b < bootstrap; ++b) {
      std::vector<double> yb;
      for (std::size_t i : usable) {
        const auto& row = rows[i];
        Rng rng = Rng::for_stream(row.seed, kAuxiliaryLevel, kBootstrapTrialOffset + static_cast<std::uint64_t>(b));
        resampled.resize(row.estimates.size());
        for (auto& v : resampled) v = row.estimates[rng.below(row.estimates.size())];
        yb.push_back(std::log(rmse_of(resampled, row.ground_truth)));
      }
      if (std::all_of(yb.begin(), yb.end(), [](double v) { return std::isfinite(v); })) replicates.push_back(ols_slope(x, yb));
    }
    fit.ci_low = replicates.empty() ? kNaN : quantile(replicates, 0.025);
    fit.ci_high = replicates.empty() ? kNaN : quantile(replicates, 0.975);
    fits.push_back(std::move(fit));
  }
  return fits;
}

void require_samples(const ExperimentConfig& config) {
  for (auto n : config.n_grid)
    if (n < 1) throw InvalidArgument("LSPE needs N >= 1");
}

void open_for_write(std::ofstream& out, const std::filesystem::path& path) {
  out.open(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

R0Setting R0Setting::parse(const std::string& text) {
  if (text == "max") return {Mode::Max, 0.0};
  if (text == "zero" || text == "0") return {Mode::Zero, 0.0};
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw InvalidArgument("r0 must be 'max', 'zero' or a number: " + text);
  return {Mode::Value, v};
}

double R0Setting::resolve(InstanceKind kind, int d, int horizon) const {
  switch (mode) {
    case Mode::Max: return max_r0(kind, d, horizon);
    case Mode::Zero: return 0.0;
    case Mode::Value: return value;
  }
  return value;
}

std::string R0Setting::label() const {
  switch (mode) {
    case Mode::Max: return "max";
    case Mode::Zero: return "zero";
    case Mode::Value: return format_double(value);
  }
  return {};
}

void ExperimentConfig::validate() const {
  if (instance != "det" && instance != "sparse" && instance != "custom")
    throw InvalidArgument("instance must be det, sparse or custom");
  if (instance == "custom" && custom_path.empty()) throw InvalidArgument("custom instance needs a JSON path");
  if (instance != "custom" && (d_grid.empty() || horizon_grid.empty() || r0_grid.empty()))
    throw InvalidArgument("d, H and r0 grids must be nonempty");
  if (n_grid.empty() || lambda_grid.empty()) throw InvalidArgument("N and lambda grids must be nonempty");
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  for (auto n : n_grid)
    if (n < 0) throw InvalidArgument("N must be >= 0");
  for (double l : lambda_grid)
    if (!(l >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in (0, 1]");
  if (bootstrap < 0 || identity_trials < 0 || threads < 1) throw InvalidArgument("bootstrap, identity_trials >= 0 and threads >= 1");
  if (instance == "custom") return;
  // Builders enforce the per-instance preconditions on (d, H, r0).
  const InstanceKind kind = parse_instance_kind(instance);
  for (int d : d_grid)
    for (int H : horizon_grid)
      for (const auto& r0 : r0_grid) {
        const double value = r0.resolve(kind, d, H);
        const bool d_ok = d % 2 == 0 && d >= (kind == InstanceKind::Deterministic ? 4 : 6);
        const bool h_ok = H >= (kind == InstanceKind::Deterministic ? 1 : 4);
        if (!d_ok || !h_ok) throw InvalidArgument("grid point d=" + std::to_string(d) + ", H=" + std::to_string(H) + " violates the instance preconditions");
        if (!(value >= 0.0 && value <= max_r0(kind, d, H))) throw InvalidArgument("r0 " + r0.label() + " out of range at d=" + std::to_string(d) + ", H=" + std::to_string(H));
      }
}

namespace {

// Grid keys take either a list or a single value.
template <class T>
std::vector<T> grid_value(const nlohmann::json& doc, const char* key, std::vector<T> fallback) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc[key];
  return v.is_array() ? v.get<std::vector<T>>() : std::vector<T>{v.get<T>()};
}

R0Setting r0_from_json(const nlohmann::json& v) {
  return v.is_string() ? R0Setting::parse(v.get<std::string>()) : R0Setting{R0Setting::Mode::Value, v.get<double>()};
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig c) {
  try {
    c.instance = doc.value("instance", c.instance);
    c.custom_path = doc.value("custom_path", c.custom_path);
    c.d_grid = grid_value(doc, "d", c.d_grid);
    c.horizon_grid = grid_value(doc, "H", c.horizon_grid);
    c.n_grid = grid_value(doc, "N", c.n_grid);
    if (doc.contains("r0")) {
      c.r0_grid.clear();
      if (doc["r0"].is_array()) {
        for (const auto& v : doc["r0"]) c.r0_grid.push_back(r0_from_json(v));
      } else {
        c.r0_grid.push_back(r0_from_json(doc["r0"]));
      }
    }
    c.lambda_grid = grid_value(doc, "lambda", c.lambda_grid);
    c.trials = doc.value("trials", c.trials);
    c.seed = doc.value("seed", c.seed);
    c.output_dir = doc.value("output_dir", c.output_dir);
    c.delta = doc.value("delta", c.delta);
    c.epsilon = doc.value("epsilon", c.epsilon);
    c.bootstrap = doc.value("bootstrap", c.bootstrap);
    c.identity_trials = doc.value("identity_trials", c.identity_trials);
    c.threads = doc.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json r0 = nlohmann::json::array();
  for (const auto& s : c.r0_grid) r0.push_back(s.mode == R0Setting::Mode::Value ? nlohmann::json(s.value) : nlohmann::json(s.label()));
  return {{"instance", c.instance}, {"custom_path", c.custom_path}, {"d", c.d_grid},       {"H", c.horizon_grid},
          {"N", c.n_grid},          {"r0", r0},                      {"lambda", c.lambda_grid}, {"trials", c.trials},
          {"seed", c.seed},         {"output_dir", c.output_dir},    {"delta", c.delta},   {"epsilon", c.epsilon},
          {"bootstrap", c.bootstrap}, {"identity_trials", c.identity_trials}, {"threads", c.threads}};
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AmplificationResult run_amplification_sweep(const ExperimentConfig& config) {
  config.validate();
  require_samples(config);
  AmplificationResult result;
  std::vector<std::string> labels;
  for (const auto& inst : prepare(config)) {
    for (std::int64_t n : config.n_grid) {
      for (double lambda : config.lambda_grid) {
        const auto start = std::chrono::steady_clock::now();
        SweepRow row;
        row.d = inst.d;
        row.horizon = inst.horizon;
        row.n = n;
        row.r0 = inst.r0;
        row.lambda = lambda;
        row.seed = point_seed(config.seed, inst.d, inst.horizon, n);
        row.ground_truth = inst.truth;

        const int identity_trials = lambda > 0.0 ? static_cast<int>(std::min<std::int64_t>(config.identity_trials, config.trials)) : 0;
        std::vector<double> estimate(static_cast<std::size_t>(config.trials), kNaN);
        std::vector<double> discrepancy(static_cast<std::size_t>(identity_trials), 0.0);
        for_each_trial(config.trials, config.threads, [&](std::int64_t t) {
          const auto data = sample_offline(inst.mdp, inst.mu, n, row.seed, static_cast<std::uint64_t>(t));
          try {
            estimate[static_cast<std::size_t>(t)] = run_lspe(data, inst.pi, inst.phi, lambda).value;
          } catch (const SingularDesignError&) {
            return;
          }
          if (t < identity_trials)
            discrepancy[static_cast<std::size_t>(t)] = check_error_identity(data, inst.pi, inst.phi, lambda, inst.mdp).relative_discrepancy;
        });

        for (double v : estimate) {
          if (std::isnan(v)) ++row.failed;
          else row.estimates.push_back(v);
        }
        row.trials = static_cast<std::int64_t>(row.estimates.size());
        if (row.trials > 0) {
          const double m = std::accumulate(row.estimates.begin(), row.estimates.end(), 0.0) / static_cast<double>(row.trials);
          double var = 0.0;
          for (double v : row.estimates) var += (v - m) * (v - m);
          row.mean = m;
          row.variance = var / static_cast<double>(row.trials);
          row.rmse = rmse_of(row.estimates, inst.truth);
          row.q05 = quantile(row.estimates, 0.05);
          row.q50 = quantile(row.estimates, 0.50);
          row.q95 = quantile(row.estimates, 0.95);
        } else {
          row.mean = row.variance = row.rmse = row.q05 = row.q50 = row.q95 = kNaN;
        }
        row.max_identity_discrepancy = identity_trials > 0 ? *std::max_element(discrepancy.begin(), discrepancy.end()) : kNaN;
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.rows.push_back(std::move(row));
        labels.push_back(inst.r0_label);
      }
    }
  }
  result.slopes = fit_slopes(result.rows, labels, config.bootstrap);
  return result;
}

SufficientStatistic distinguishing_statistic(InstanceKind kind, int d, const OfflineDataset& data, const LayeredMdp& mdp) {
  SufficientStatistic stat;
  const int H = mdp.horizon();
  if (data.horizon() != H) throw InvalidArgument("dataset horizon does not match the MDP");
  if (kind == InstanceKind::Deterministic) {
    for (const auto& x : data.levels[H - 1]) {
      if (mdp.reward(x.state, x.action).kind() != RewardKind::TwoPoint) continue;
      ++stat.count;
      if (x.reward > 0.0) ++stat.plus;
    }
    return stat;
  }
  const int dh = d / 2 - 1;
  const int level = H - 2;
  const StateId first = mdp.level_begin(level);
  const StateId plus = mdp.level_begin(H - 1) + dh + 1;
  for (const auto& x : data.levels[level]) {
    if (x.state - first >= dh) continue;
    ++stat.count;
    if (x.next == plus) ++stat.plus;
  }
  return stat;
}

bool likelihood_ratio_picks_alternative(const SufficientStatistic& stat, double gap, Rng& tie_breaker) {
  const double k = static_cast<double>(stat.plus);
  const double rest = static_cast<double>(stat.count - stat.plus);
  // log of Bernoulli((1+gap)/2)^k (1-gap)/2)^rest over (1/2)^count
  const double up = k > 0.0 ? k * std::log1p(gap) : 0.0;
  const double down = rest > 0.0 ? rest * std::log1p(-gap) : 0.0;
  const double llr = up + down;
  if (llr > 0.0) return true;
  if (llr < 0.0) return false;
  return tie_breaker.bernoulli(0.5);
}

DistinguishResult run_distinguishing_test(InstanceKind kind, int d, int horizon, std::int64_t n, std::int64_t trials,
                                          std::uint64_t seed, int threads) {
  if (n < 0) throw InvalidArgument("N must be >= 0");
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  const auto null_world = build_instance(kind, d, horizon, 0.0);
  const auto alt_world = build_instance(kind, d, horizon, max_r0(kind, d, horizon));
  const double gap = alt_world.r0;

  std::vector<char> correct(static_cast<std::size_t>(trials), 0);
  for_each_trial(trials, threads, [&](std::int64_t t) {
    Rng coin = Rng::for_stream(seed, kAuxiliaryLevel, static_cast<std::uint64_t>(t));
    const bool alternative = coin.bernoulli(0.5);
    const auto& world = alternative ? alt_world : null_world;
    SufficientStatistic stat;
    if (n > 0) stat = distinguishing_statistic(kind, d, sample_offline(world.mdp, world.mu, n, seed, static_cast<std::uint64_t>(t)), world.mdp);
    correct[static_cast<std::size_t>(t)] = likelihood_ratio_picks_alternative(stat, gap, coin) == alternative;
  });

  DistinguishResult out{kind, d, horizon, n, trials, 0, 0.0, 0.0, 0.0, seed};
  out.correct = std::count(correct.begin(), correct.end(), 1);
  out.success = static_cast<double>(out.correct) / static_cast<double>(trials);
  const double z = 1.959963984540054;
  const double tn = static_cast<double>(trials);
  const double center = (out.success + z * z / (2.0 * tn)) / (1.0 + z * z / tn);
  const double half = wilson_half_width(out.success, tn, z);
  out.ci_low = std::max(0.0, center - half);
  out.ci_high = std::min(1.0, center + half);
  return out;
}

DataDistribution smoothed_on_policy(const LayeredMdp& mdp, const Policy& pi, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in [0, 1]");
  const auto occ = marginal_occupancy(mdp, pi);
  const int A = mdp.num_actions();
  std::vector<std::vector<Atom>> levels(mdp.horizon());
  for (int h = 0; h < mdp.horizon(); ++h) {
    const double floor = epsilon / (static_cast<double>(mdp.level_size(h)) * A);
    for (StateId s = mdp.level_begin(h); s < mdp.level_end(h); ++s)
      for (ActionId a = 0; a < A; ++a)
        if (const double p = (1.0 - epsilon) * occ[s] * pi.prob(s, a) + floor; p > 0.0) levels[h].push_back({s, a, p});
  }
  return DataDistribution(std::move(levels));
}

std::vector<UpperBoundRow> run_upper_bound_check(const ExperimentConfig& config) {
  config.validate();
  require_samples(config);
  std::vector<UpperBoundRow> rows;
  for (auto& inst : prepare(config)) {
    const DataDistribution mu = smoothed_on_policy(inst.mdp, inst.pi, config.epsilon);
    const ShiftReport shift = shift_report(inst.mdp, mu, inst.pi, inst.phi);
    // The bound is stated for C_h >= 1.
    std::vector<double> coefficients;
    for (double c : shift.coefficient) coefficients.push_back(std::max(1.0, c));

    for (std::int64_t n : config.n_grid) {
      const TheoremBound bound = evaluate_theorem_bound(coefficients, inst.d, inst.horizon, static_cast<double>(n), config.delta);
      UpperBoundRow row;
      row.d = inst.d;
      row.horizon = inst.horizon;
      row.n = n;
      row.r0 = inst.r0;
      row.delta = config.delta;
      row.epsilon = config.epsilon;
      row.lambda = bound.lambda;
      row.product_c = bound.product_c;
      row.bound = bound.bound;
      row.vacuous = bound.vacuous;
      row.seed = point_seed(config.seed, inst.d, inst.horizon, n);

      std::vector<double> sq(static_cast<std::size_t>(config.trials), kNaN);
      for_each_trial(config.trials, config.threads, [&](std::int64_t t) {
        const auto data = sample_offline(inst.mdp, mu, n, row.seed, static_cast<std::uint64_t>(t));
        try {
          const double err = run_lspe(data, inst.pi, inst.phi, bound.lambda).value - inst.truth;
          sq[static_cast<std::size_t>(t)] = err * err;
        } catch (const SingularDesignError&) {
        }
      });
      std::vector<double> ok;
      for (double v : sq) (std::isnan(v) ? row.failed : row.trials) += 1, std::isnan(v) ? void() : ok.push_back(v);
      row.quantile_sq_error = quantile(ok, 1.0 - config.delta);
      row.mean_sq_error = ok.empty() ? kNaN : std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
      row.pass = row.vacuous || (!ok.empty() && row.quantile_sq_error <= row.bound);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "d,H,N,r0,lambda,trials,mean,var,rmse,q05,q50,q95,seed,failed\n";
  for (const auto& r : rows) {
    out << r.d << ',' << r.horizon << ',' << r.n << ',' << format_double(r.r0) << ',' << format_double(r.lambda) << ','
        << r.trials << ',' << format_double(r.mean) << ',' << format_double(r.variance) << ',' << format_double(r.rmse)
        << ',' << format_double(r.q05) << ',' << format_double(r.q50) << ',' << format_double(r.q95) << ',' << r.seed
        << ',' << r.failed << '\n';
  }
}

void write_slopes_csv(std::ostream& out, std::span<const SlopeFit> slopes) {
  out << "d,N,r0,lambda,points,slope,ci_low,ci_high\n";
  for (const auto& s : slopes) {
    out << s.d << ',' << s.n << ',' << s.r0 << ',' << format_double(s.lambda) << ',' << s.points << ','
        << format_double(s.slope) << ',' << format_double(s.ci_low) << ',' << format_double(s.ci_high) << '\n';
  }
}

void write_distinguish_csv(std::ostream& out, std::span<const DistinguishResult> rows) {
  out << "kind,d,H,N,trials,correct,success,ci_low,ci_high,seed\n";
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << r.d << ',' << r.horizon << ',' << r.n << ',' << r.trials << ',' << r.correct << ','
        << format_double(r.success) << ',' << format_double(r.ci_low) << ',' << format_double(r.ci_high) << ',' << r.seed
        << '\n';
  }
}

void write_upper_bound_csv(std::ostream& out, std::span<const UpperBoundRow> rows) {
  out << "d,H,N,r0,delta,epsilon,lambda,trials,failed,quantile_sq_error,mean_sq_error,prod_C,bound,status,pass,seed\n";
  for (const auto& r : rows) {
    out << r.d << ',' << r.horizon << ',' << r.n << ',' << format_double(r.r0) << ',' << format_double(r.delta) << ','
        << format_double(r.epsilon) << ',' << format_double(r.lambda) << ',' << r.trials << ',' << r.failed << ','
        << format_double(r.quantile_sq_error) << ',' << format_double(r.mean_sq_error) << ','
        << format_double(r.product_c) << ',' << format_double(r.bound) << ',' << (r.vacuous ? "bound vacuous" : "ok")
        << ',' << (r.pass ? 1 : 0) << ',' << r.seed << '\n';
  }
}

std::vector<std::filesystem::path> emit_plot_data(const PlotInputs& inputs, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  std::ofstream out;

  written.push_back(dir / "rmse_vs_H.csv");
  open_for_write(out, written.back());
  out << "d,H,N,r0,lambda,rmse,seed\n";
  for (const auto& r : inputs.amplification)
    out << r.d << ',' << r.horizon << ',' << r.n << ',' << format_double(r.r0) << ',' << format_double(r.lambda) << ','
        << format_double(r.rmse) << ',' << r.seed << '\n';
  out.close();
  if (!out) throw Error("error writing " + written.back().string());

  written.push_back(dir / "success_vs_N.csv");
  open_for_write(out, written.back());
  out << "kind,d,H,N,success,ci_low,ci_high,trials,seed\n";
  for (const auto& r : inputs.distinguishing)
    out << to_string(r.kind) << ',' << r.d << ',' << r.horizon << ',' << r.n << ',' << format_double(r.success) << ','
        << format_double(r.ci_low) << ',' << format_double(r.ci_high) << ',' << r.trials << ',' << r.seed << '\n';
  out.close();
  if (!out) throw Error("error writing " + written.back().string());

  written.push_back(dir / "bound_vs_empirical.csv");
  open_for_write(out, written.back());
  out << "d,H,N,series,value\n";
  for (const auto& r : inputs.upper_bound) {
    const std::string prefix = std::to_string(r.d) + ',' + std::to_string(r.horizon) + ',' + std::to_string(r.n) + ',';
    out << prefix << "empirical_quantile_sq_error," << format_double(r.quantile_sq_error) << '\n';
    out << prefix << "bound," << format_double(r.bound) << '\n';
  }
  out.close();
  if (!out) throw Error("error writing " + written.back().string());
  return written;
}

}  // namespace oplab
