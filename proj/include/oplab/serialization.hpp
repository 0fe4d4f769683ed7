#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oplab/features.hpp"
#include "oplab/instances.hpp"
#include "oplab/lspe.hpp"
#include "oplab/mdp.hpp"
#include "oplab/shift.hpp"

namespace oplab {

using json = nlohmann::json;

// Document layout (format "oplab.mdp", version 1):
//   num_actions, levels (state labels per level), initial_state,
//   transitions [{s, a, next: [[state, prob], ...]}],
//   rewards [{s, a, kind: "deterministic", value} | {s, a, kind: "two_point", p}]
// plus optional sections in the same document:
//   features {dim, rows}, mu [[{s, a, p}]], eval_policy, data_policy
//   (one probability row per state), instance {kind, d, horizon, d_hat, r0,
//   max_r0, ground_truth_value}.
json mdp_to_json(const LayeredMdp& mdp);
LayeredMdp mdp_from_json(const json& doc);

json features_to_json(const FeatureMap& phi);
FeatureMap features_from_json(const json& section, const LayeredMdp& mdp);

json distribution_to_json(const DataDistribution& mu);
DataDistribution distribution_from_json(const json& section);

json policy_to_json(const Policy& pi);
Policy policy_from_json(const json& section, const LayeredMdp& mdp);

json bundle_to_json(const HardInstanceBundle& bundle);
json reduced_to_json(const ReducedInstance& reduced);

// Everything a JSON document may carry. Sections absent from the document
// stay empty.
struct Problem {
  LayeredMdp mdp;
  std::optional<FeatureMap> phi;
  std::optional<DataDistribution> mu;
  std::optional<Policy> eval_policy;
  std::optional<Policy> data_policy;
  json instance;
};
Problem problem_from_json(const json& doc);
Problem load_problem(const std::string& path);

json to_json(const RealizabilityReport& report);
json to_json(const CoverageReport& report);
json to_json(const ShiftReport& report);
json to_json(const LinearQEstimate& estimate);
json to_json(const IdentityReport& report);

// CSV with header level,s,a,r,s_next,trial; levels are one-based and s_next is
// empty at the last level.
void write_dataset_csv(std::ostream& out, std::span<const OfflineDataset> datasets);
// Reads rows of a single trial back into a dataset (mu must be supplied).
OfflineDataset read_dataset_csv(std::istream& in, const LayeredMdp& mdp, const DataDistribution& mu,
                                std::uint64_t trial = 0);

// printf("%.17g") formatting shared by every CSV writer.
std::string format_double(double x);

}  // namespace oplab
