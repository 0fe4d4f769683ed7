#include "oplab/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace oplab {

namespace {

constexpr const char* kFormat = "oplab.mdp";
constexpr int kVersion = 1;

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json mdp_to_json(const LayeredMdp& mdp) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["num_actions"] = mdp.num_actions();
  json levels = json::array();
  for (int h = 0; h < mdp.horizon(); ++h) {
    json names = json::array();
    for (StateId s = mdp.level_begin(h); s < mdp.level_end(h); ++s) names.push_back(mdp.label(s));
    levels.push_back(std::move(names));
  }
  doc["levels"] = std::move(levels);
  doc["initial_state"] = mdp.initial_state();

  json transitions = json::array();
  json rewards = json::array();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const auto row = mdp.successors(s, a);
      if (!row.empty()) {
        json next = json::array();
        for (const auto& succ : row) next.push_back({succ.state, succ.prob});
        transitions.push_back({{"s", s}, {"a", a}, {"next", std::move(next)}});
      }
      const auto& r = mdp.reward(s, a);
      if (r.kind() == RewardKind::Deterministic)
        rewards.push_back({{"s", s}, {"a", a}, {"kind", "deterministic"}, {"value", r.parameter()}});
      else
        rewards.push_back({{"s", s}, {"a", a}, {"kind", "two_point"}, {"p", r.parameter()}});
    }
  }
  doc["transitions"] = std::move(transitions);
  doc["rewards"] = std::move(rewards);
  return doc;
}

LayeredMdp mdp_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string(kFormat)) != kFormat) throw InvalidArgument("not an oplab.mdp document");
    if (doc.value("version", kVersion) != kVersion) throw InvalidArgument("unsupported document version");
    MdpBuilder b(doc.at("levels").get<std::vector<std::vector<std::string>>>(), doc.at("num_actions").get<int>());
    b.set_initial_state(doc.at("initial_state").get<StateId>());
    for (const auto& t : doc.at("transitions")) {
      std::vector<Successor> row;
      for (const auto& pair : t.at("next")) row.push_back({pair.at(0).get<StateId>(), pair.at(1).get<double>()});
      b.set_transition(t.at("s").get<StateId>(), t.at("a").get<ActionId>(), std::move(row));
    }
    for (const auto& r : doc.value("rewards", json::array())) {
      const auto kind = r.at("kind").get<std::string>();
      RewardModel model = kind == "deterministic" ? RewardModel::deterministic(r.at("value").get<double>())
                          : kind == "two_point"   ? RewardModel::two_point(r.at("p").get<double>())
                                                  : throw InvalidArgument("unknown reward kind: " + kind);
      b.set_reward(r.at("s").get<StateId>(), r.at("a").get<ActionId>(), model);
    }
    return b.build();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed MDP document: ") + e.what());
  }
}

json features_to_json(const FeatureMap& phi) { return {{"dim", phi.dim()}, {"rows", matrix_to_json(phi.table())}}; }

FeatureMap features_from_json(const json& section, const LayeredMdp& mdp) {
  try {
    const int d = section.at("dim").get<int>();
    const auto& rows = section.at("rows");
    Eigen::MatrixXd table(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != static_cast<std::size_t>(d)) throw InvalidArgument("feature row has the wrong dimension");
      for (int j = 0; j < d; ++j) table(static_cast<Eigen::Index>(i), j) = rows[i][j].get<double>();
    }
    return FeatureMap(mdp.num_states(), mdp.num_actions(), std::move(table));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed features section: ") + e.what());
  }
}

json distribution_to_json(const DataDistribution& mu) {
  json levels = json::array();
  for (int h = 0; h < mu.horizon(); ++h) {
    json atoms = json::array();
    for (const auto& atom : mu.level(h)) atoms.push_back({{"s", atom.state}, {"a", atom.action}, {"p", atom.prob}});
    levels.push_back(std::move(atoms));
  }
  return levels;
}

DataDistribution distribution_from_json(const json& section) {
  try {
    std::vector<std::vector<Atom>> levels;
    for (const auto& level : section) {
      std::vector<Atom> atoms;
      for (const auto& atom : level)
        atoms.push_back({atom.at("s").get<StateId>(), atom.at("a").get<ActionId>(), atom.at("p").get<double>()});
      levels.push_back(std::move(atoms));
    }
    return DataDistribution(std::move(levels));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed mu section: ") + e.what());
  }
}

json policy_to_json(const Policy& pi) {
  json rows = json::array();
  for (StateId s = 0; s < pi.num_states(); ++s) {
    const auto dist = pi.distribution(s);
    rows.push_back(std::vector<double>(dist.begin(), dist.end()));
  }
  return rows;
}

Policy policy_from_json(const json& section, const LayeredMdp& mdp) {
  try {
    std::vector<double> probs;
    if (section.size() != static_cast<std::size_t>(mdp.num_states())) throw InvalidArgument("policy needs one row per state");
    for (const auto& row : section) {
      if (row.size() != static_cast<std::size_t>(mdp.num_actions())) throw InvalidArgument("policy row has the wrong size");
      for (const auto& p : row) probs.push_back(p.get<double>());
    }
    return Policy(mdp.num_states(), mdp.num_actions(), std::move(probs));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed policy section: ") + e.what());
  }
}

json bundle_to_json(const HardInstanceBundle& bundle) {
  json doc = mdp_to_json(bundle.mdp);
  doc["features"] = features_to_json(bundle.phi);
  doc["mu"] = distribution_to_json(bundle.mu);
  doc["eval_policy"] = policy_to_json(bundle.eval_policy);
  if (bundle.data_policy) doc["data_policy"] = policy_to_json(*bundle.data_policy);
  doc["instance"] = {{"kind", to_string(bundle.kind)},
                     {"d", bundle.d},
                     {"horizon", bundle.horizon},
                     {"d_hat", bundle.d_hat},
                     {"r0", bundle.r0},
                     {"max_r0", bundle.max_r0},
                     {"ground_truth_value", bundle.ground_truth_value}};
  return doc;
}

json reduced_to_json(const ReducedInstance& reduced) {
  json doc = mdp_to_json(reduced.mdp);
  doc["features"] = features_to_json(reduced.phi);
  doc["mu"] = distribution_to_json(reduced.mu);
  doc["eval_policy"] = policy_to_json(reduced.eval_policy);
  doc["instance"] = {{"kind", "reduction"}};
  return doc;
}

Problem problem_from_json(const json& doc) {
  Problem p{mdp_from_json(doc), std::nullopt, std::nullopt, std::nullopt, std::nullopt, doc.value("instance", json::object())};
  if (doc.contains("features")) p.phi = features_from_json(doc["features"], p.mdp);
  if (doc.contains("mu")) {
    p.mu = distribution_from_json(doc["mu"]);
    p.mu->check_compatible(p.mdp);
  }
  if (doc.contains("eval_policy")) p.eval_policy = policy_from_json(doc["eval_policy"], p.mdp);
  if (doc.contains("data_policy")) p.data_policy = policy_from_json(doc["data_policy"], p.mdp);
  return p;
}

Problem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
  return problem_from_json(doc);
}

json to_json(const RealizabilityReport& report) {
  json theta = json::array();
  for (const auto& t : report.theta) theta.push_back(vector_to_json(t));
  return {{"theta", std::move(theta)},
          {"residual", report.residual},
          {"theta_norm", report.theta_norm},
          {"max_residual", report.max_residual()}};
}

json to_json(const CoverageReport& report) {
  json violations = json::array();
  for (const auto& v : report.violations)
    violations.push_back({{"level", v.level + 1}, {"min_eigenvalue", v.min_eigenvalue}, {"reason", v.reason}});
  return {{"passed", report.passed},
          {"threshold", report.threshold},
          {"min_eigenvalue", report.min_eigenvalue},
          {"violations", std::move(violations)}};
}

json to_json(const ShiftReport& report) {
  json levels = json::array();
  for (std::size_t h = 0; h < report.coefficient.size(); ++h) {
    levels.push_back({{"level", h + 1},
                      {"sigma_min", report.sigma_min[h]},
                      {"coefficient", finite_or_null(report.coefficient[h])},
                      {"infinite", std::isinf(report.coefficient[h])},
                      {"completeness_residual", finite_or_null(report.completeness[h])},
                      {"lambda", matrix_to_json(report.lambda[h])},
                      {"lambda_bar", matrix_to_json(report.lambda_bar[h])}});
  }
  return {{"levels", std::move(levels)}, {"product", finite_or_null(report.product)}, {"any_infinite", report.any_infinite()}};
}

json to_json(const LinearQEstimate& estimate) {
  json theta = json::array();
  for (const auto& t : estimate.theta) theta.push_back(vector_to_json(t));
  json cond = json::array();
  for (double c : estimate.condition_number) cond.push_back(finite_or_null(c));
  return {{"theta", std::move(theta)}, {"lambda", estimate.lambda}, {"value", estimate.value}, {"condition_number", std::move(cond)}};
}

json to_json(const IdentityReport& report) {
  return {{"lhs", report.lhs},
          {"rhs", report.rhs},
          {"relative_discrepancy", report.relative_discrepancy},
          {"true_value", report.true_value},
          {"estimate", report.estimate},
          {"max_abs_noise", report.max_abs_noise}};
}

void write_dataset_csv(std::ostream& out, std::span<const OfflineDataset> datasets) {
  out << "level,s,a,r,s_next,trial\n";
  for (const auto& data : datasets) {
    for (int h = 0; h < data.horizon(); ++h) {
      for (const auto& x : data.levels[h]) {
        out << h + 1 << ',' << x.state << ',' << x.action << ',' << format_double(x.reward) << ',';
        if (x.next != kNoState) out << x.next;
        out << ',' << data.trial << '\n';
      }
    }
  }
}

OfflineDataset read_dataset_csv(std::istream& in, const LayeredMdp& mdp, const DataDistribution& mu, std::uint64_t trial) {
  std::string line;
  if (!std::getline(in, line) || line != "level,s,a,r,s_next,trial") throw InvalidArgument("dataset CSV header mismatch");
  OfflineDataset data{.levels = {}, .initial_state = mdp.initial_state(), .seed = 0, .trial = trial, .mu = mu};
  data.levels.resize(mdp.horizon());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 6) throw InvalidArgument("dataset CSV line " + std::to_string(lineno) + " needs 6 fields");
    const auto fail = [&](const std::string& what) {
      return InvalidArgument("dataset CSV line " + std::to_string(lineno) + ": " + what);
    };
    int h = 0;
    Sample x;
    try {
      if (std::stoull(cells[5]) != trial) continue;
      h = std::stoi(cells[0]) - 1;
      x = Sample{std::stoi(cells[1]), std::stoi(cells[2]), std::stod(cells[3]),
                 cells[4].empty() ? kNoState : std::stoi(cells[4])};
    } catch (const std::logic_error&) {
      throw fail("malformed number");
    }
    if (h < 0 || h >= mdp.horizon()) throw fail("bad level");
    if (!mdp.valid_pair(x.state, x.action) || mdp.level_of(x.state) != h) throw fail("state outside its level");
    if (!mu.in_support(h, x.state, x.action)) throw fail("pair outside the support of mu");
    if (!mdp.reward(x.state, x.action).can_emit(x.reward)) throw fail("reward the model cannot emit");
    if ((h + 1 < mdp.horizon()) != (x.next != kNoState)) throw fail("successor presence does not match the level");
    if (x.next != kNoState) {
      const auto row = mdp.successors(x.state, x.action);
      if (std::none_of(row.begin(), row.end(), [&](const Successor& s) { return s.state == x.next; }))
        throw fail("successor not reachable from the pair");
    }
    data.levels[h].push_back(x);
  }
  return data;
}

}  // namespace oplab
