#include "oplab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oplab/rng.hpp"

namespace oplab {

namespace {

void check_probability_vector(std::span<const double> p, const std::string& what) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument(what + ": negative or non-finite probability");
    total += x;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance)
    throw InvalidArgument(what + ": probabilities sum to " + std::to_string(total));
}

}  // namespace

RewardModel RewardModel::deterministic(double value) {
  if (!(value >= -1.0 && value <= 1.0)) throw InvalidArgument("deterministic reward outside [-1, 1]: " + std::to_string(value));
  return {RewardKind::Deterministic, value};
}

RewardModel RewardModel::two_point(double p_plus) {
  if (!(p_plus >= 0.0 && p_plus <= 1.0)) throw InvalidArgument("two-point reward probability outside [0, 1]: " + std::to_string(p_plus));
  return {RewardKind::TwoPoint, p_plus};
}

bool RewardModel::can_emit(double r) const noexcept {
  if (kind_ == RewardKind::Deterministic) return r == param_;
  return (r == 1.0 && param_ > 0.0) || (r == -1.0 && param_ < 1.0);
}

int LayeredMdp::level_of(StateId s) const {
  if (s < 0 || s >= num_states()) throw InvalidArgument("state id out of range: " + std::to_string(s));
  const auto it = std::upper_bound(level_offsets_.begin(), level_offsets_.end(), s);
  return static_cast<int>(it - level_offsets_.begin()) - 1;
}

MdpBuilder::MdpBuilder(std::vector<std::vector<std::string>> level_labels, int num_actions)
    : num_actions_(num_actions) {
  if (level_labels.empty()) throw InvalidArgument("horizon must be positive");
  if (num_actions < 1) throw InvalidArgument("need at least one action");
  offsets_.push_back(0);
  for (auto& level : level_labels) {
    if (level.empty()) throw InvalidArgument("every level needs at least one state");
    offsets_.push_back(offsets_.back() + static_cast<StateId>(level.size()));
    for (auto& name : level) labels_.push_back(std::move(name));
  }
  const auto pairs = static_cast<std::size_t>(offsets_.back()) * num_actions_;
  rows_.resize(pairs);
  rewards_.assign(pairs, RewardModel::deterministic(0.0));
}

StateId MdpBuilder::state(int level, int index_in_level) const {
  if (level < 0 || level >= horizon()) throw InvalidArgument("level out of range");
  const StateId s = offsets_[level] + index_in_level;
  if (index_in_level < 0 || s >= offsets_[level + 1]) throw InvalidArgument("state index out of range in level " + std::to_string(level + 1));
  return s;
}

MdpBuilder& MdpBuilder::set_initial_state(StateId s) {
  if (s < offsets_[0] || s >= offsets_[1]) throw InvalidArgument("initial state must belong to the first level");
  initial_ = s;
  return *this;
}

MdpBuilder& MdpBuilder::set_transition(StateId s, ActionId a, std::vector<Successor> row) {
  if (s < 0 || s >= offsets_.back() || a < 0 || a >= num_actions_) throw InvalidArgument("transition for invalid (state, action)");
  rows_[static_cast<std::size_t>(s) * num_actions_ + a] = std::move(row);
  return *this;
}

MdpBuilder& MdpBuilder::set_deterministic_transition(StateId s, ActionId a, StateId next) {
  return set_transition(s, a, {Successor{next, 1.0}});
}

MdpBuilder& MdpBuilder::set_reward(StateId s, ActionId a, RewardModel reward) {
  if (s < 0 || s >= offsets_.back() || a < 0 || a >= num_actions_) throw InvalidArgument("reward for invalid (state, action)");
  rewards_[static_cast<std::size_t>(s) * num_actions_ + a] = reward;
  return *this;
}

LayeredMdp MdpBuilder::build() const {
  if (initial_ == kNoState) throw InvalidArgument("initial state not set");
  LayeredMdp mdp;
  mdp.num_actions_ = num_actions_;
  mdp.level_offsets_ = offsets_;
  mdp.labels_ = labels_;
  mdp.initial_state_ = initial_;
  mdp.rewards_ = rewards_;
  mdp.successors_.resize(rows_.size());

  const int H = horizon();
  for (int h = 0; h < H; ++h) {
    for (StateId s = offsets_[h]; s < offsets_[h + 1]; ++s) {
      for (ActionId a = 0; a < num_actions_; ++a) {
        const auto idx = static_cast<std::size_t>(s) * num_actions_ + a;
        const auto& row = rows_[idx];
        const std::string where = "transition (" + labels_[s] + ", a" + std::to_string(a + 1) + ")";
        if (h == H - 1) {
          if (row && !row->empty()) throw InvalidArgument(where + ": last level has no successors");
          continue;
        }
        if (!row || row->empty()) throw InvalidArgument(where + " missing");
        std::vector<double> probs;
        std::vector<Successor> merged;
        for (const auto& succ : *row) {
          if (succ.state < offsets_[h + 1] || succ.state >= offsets_[h + 2])
            throw InvalidArgument(where + ": successor outside level " + std::to_string(h + 2));
          probs.push_back(succ.prob);
          if (succ.prob > 0.0) merged.push_back(succ);
        }
        check_probability_vector(probs, where);
        mdp.successors_[idx] = std::move(merged);
      }
    }
  }
  return mdp;
}

Policy::Policy(int num_states, int num_actions, std::vector<double> probabilities)
    : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probabilities)) {
  if (num_states < 1 || num_actions < 1) throw InvalidArgument("policy needs states and actions");
  if (probs_.size() != static_cast<std::size_t>(num_states) * num_actions)
    throw InvalidArgument("policy table has wrong size");
  for (StateId s = 0; s < num_states_; ++s) check_probability_vector(distribution(s), "policy at state " + std::to_string(s));
}

Policy Policy::deterministic(int num_actions, std::span<const ActionId> actions) {
  std::vector<double> probs(actions.size() * num_actions, 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= num_actions) throw InvalidArgument("policy action out of range");
    probs[s * num_actions + actions[s]] = 1.0;
  }
  return Policy(static_cast<int>(actions.size()), num_actions, std::move(probs));
}

Policy Policy::constant(int num_states, int num_actions, ActionId action) {
  const std::vector<ActionId> actions(num_states, action);
  return deterministic(num_actions, actions);
}

Policy Policy::uniform(int num_states, int num_actions) {
  std::vector<double> probs(static_cast<std::size_t>(num_states) * num_actions, 1.0 / num_actions);
  // Exact 1/A sums can miss 1 by an ulp or two; well within tolerance.
  return Policy(num_states, num_actions, std::move(probs));
}

Policy Policy::random(int num_states, int num_actions, std::uint64_t seed, bool deterministic) {
  Rng rng(derive_seed(seed, 0x901cULL));
  if (deterministic) {
    std::vector<ActionId> actions(num_states);
    for (auto& a : actions) a = static_cast<ActionId>(rng.below(num_actions));
    return Policy::deterministic(num_actions, actions);
  }
  std::vector<double> probs(static_cast<std::size_t>(num_states) * num_actions);
  for (int s = 0; s < num_states; ++s) {
    double total = 0.0;
    for (int a = 0; a < num_actions; ++a) {
      // Exponential weights give a uniform draw from the simplex.
      const double w = -std::log(1.0 - rng.uniform());
      probs[static_cast<std::size_t>(s) * num_actions + a] = w;
      total += w;
    }
    for (int a = 0; a < num_actions; ++a) probs[static_cast<std::size_t>(s) * num_actions + a] /= total;
  }
  return Policy(num_states, num_actions, std::move(probs));
}

bool Policy::is_deterministic() const {
  return std::all_of(probs_.begin(), probs_.end(), [](double p) { return p == 0.0 || p == 1.0; });
}

ActionId Policy::action(StateId s) const {
  const auto dist = distribution(s);
  for (ActionId a = 0; a < num_actions_; ++a) {
    if (dist[a] == 1.0) return a;
  }
  throw PreconditionError("policy is not deterministic at state " + std::to_string(s));
}

Policy Policy::with_distribution(StateId s, std::span<const double> dist) const {
  if (dist.size() != static_cast<std::size_t>(num_actions_)) throw InvalidArgument("distribution has wrong size");
  auto probs = probs_;
  std::copy(dist.begin(), dist.end(), probs.begin() + static_cast<std::ptrdiff_t>(s) * num_actions_);
  return Policy(num_states_, num_actions_, std::move(probs));
}

void Policy::check_compatible(const LayeredMdp& mdp) const {
  if (num_states_ != mdp.num_states() || num_actions_ != mdp.num_actions())
    throw InvalidArgument("policy shape does not match the MDP");
}

DataDistribution::DataDistribution(std::vector<std::vector<Atom>> levels) : levels_(std::move(levels)) {
  for (std::size_t h = 0; h < levels_.size(); ++h) {
    if (levels_[h].empty()) throw InvalidArgument("data distribution has empty support at level " + std::to_string(h + 1));
    std::vector<double> probs;
    for (const auto& atom : levels_[h]) probs.push_back(atom.prob);
    check_probability_vector(probs, "data distribution at level " + std::to_string(h + 1));
  }
}

DataDistribution DataDistribution::uniform_over(std::vector<std::vector<std::pair<StateId, ActionId>>> support) {
  std::vector<std::vector<Atom>> levels;
  for (const auto& level : support) {
    std::vector<Atom> atoms;
    for (const auto& [s, a] : level) atoms.push_back({s, a, 1.0 / static_cast<double>(level.size())});
    levels.push_back(std::move(atoms));
  }
  return DataDistribution(std::move(levels));
}

bool DataDistribution::in_support(int h, StateId s, ActionId a) const {
  const auto& atoms = levels_.at(h);
  return std::any_of(atoms.begin(), atoms.end(),
                     [&](const Atom& atom) { return atom.state == s && atom.action == a && atom.prob > 0.0; });
}

void DataDistribution::check_compatible(const LayeredMdp& mdp) const {
  if (horizon() != mdp.horizon()) throw InvalidArgument("data distribution horizon does not match the MDP");
  for (int h = 0; h < horizon(); ++h) {
    for (const auto& atom : levels_[h]) {
      if (atom.state < mdp.level_begin(h) || atom.state >= mdp.level_end(h) || atom.action < 0 ||
          atom.action >= mdp.num_actions())
        throw InvalidArgument("data distribution atom outside the state-action space of level " + std::to_string(h + 1));
    }
  }
}

}  // namespace oplab
