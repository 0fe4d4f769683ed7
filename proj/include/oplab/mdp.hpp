#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oplab/error.hpp"

namespace oplab {

// States carry stable integer ids assigned level-major: all states of
// level 0 first, then level 1, and so on.
using StateId = std::int32_t;
using ActionId = std::int32_t;

inline constexpr StateId kNoState = -1;

// Row-sum tolerance for every probability vector in the library.
inline constexpr double kProbabilityTolerance = 1e-12;

enum class RewardKind { Deterministic, TwoPoint };

// Either a fixed value in [-1, 1], or +1 with probability p and -1 otherwise.
class RewardModel {
 public:
  static RewardModel deterministic(double value);
  static RewardModel two_point(double p_plus);

  RewardKind kind() const noexcept { return kind_; }
  // Deterministic value, or the probability of +1 for TwoPoint.
  double parameter() const noexcept { return param_; }
  double mean() const noexcept { return kind_ == RewardKind::Deterministic ? param_ : 2.0 * param_ - 1.0; }
  bool can_emit(double r) const noexcept;

  friend bool operator==(const RewardModel&, const RewardModel&) = default;

 private:
  RewardModel(RewardKind kind, double param) : kind_(kind), param_(param) {}
  RewardKind kind_ = RewardKind::Deterministic;
  double param_ = 0.0;
};

struct Successor {
  StateId state = kNoState;
  double prob = 0.0;
  friend bool operator==(const Successor&, const Successor&) = default;
};

class MdpBuilder;

// Finite layered episodic MDP with a fixed initial state. Immutable once built.
class LayeredMdp {
 public:
  int horizon() const noexcept { return static_cast<int>(level_offsets_.size()) - 1; }
  int num_actions() const noexcept { return num_actions_; }
  int num_states() const noexcept { return level_offsets_.back(); }
  StateId initial_state() const noexcept { return initial_state_; }

  StateId level_begin(int level) const { return level_offsets_.at(level); }
  StateId level_end(int level) const { return level_offsets_.at(level + 1); }
  int level_size(int level) const { return level_end(level) - level_begin(level); }
  int level_of(StateId s) const;

  std::span<const Successor> successors(StateId s, ActionId a) const { return successors_[index(s, a)]; }
  const RewardModel& reward(StateId s, ActionId a) const { return rewards_[index(s, a)]; }
  const std::string& label(StateId s) const { return labels_.at(s); }

  // Flat (state, action) index used by feature tables and Q tables.
  std::size_t index(StateId s, ActionId a) const noexcept {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(a);
  }
  bool valid_pair(StateId s, ActionId a) const noexcept {
    return s >= 0 && s < num_states() && a >= 0 && a < num_actions_;
  }

 private:
  friend class MdpBuilder;
  LayeredMdp() = default;

  int num_actions_ = 0;
  std::vector<StateId> level_offsets_;
  std::vector<std::string> labels_;
  StateId initial_state_ = kNoState;
  std::vector<std::vector<Successor>> successors_;
  std::vector<RewardModel> rewards_;
};

// Assembles a LayeredMdp. Every (state, action) below the last level needs a
// transition row; unset rewards default to Deterministic(0).
class MdpBuilder {
 public:
  MdpBuilder(std::vector<std::vector<std::string>> level_labels, int num_actions);

  StateId state(int level, int index_in_level) const;
  int horizon() const noexcept { return static_cast<int>(offsets_.size()) - 1; }
  int num_actions() const noexcept { return num_actions_; }

  MdpBuilder& set_initial_state(StateId s);
  MdpBuilder& set_transition(StateId s, ActionId a, std::vector<Successor> row);
  MdpBuilder& set_deterministic_transition(StateId s, ActionId a, StateId next);
  MdpBuilder& set_reward(StateId s, ActionId a, RewardModel reward);

  // Validates every invariant and returns the finished MDP.
  LayeredMdp build() const;

 private:
  int num_actions_;
  std::vector<StateId> offsets_;
  std::vector<std::string> labels_;
  StateId initial_ = kNoState;
  std::vector<std::optional<std::vector<Successor>>> rows_;
  std::vector<RewardModel> rewards_;
};

// Stochastic policy: one action distribution per state.
class Policy {
 public:
  Policy(int num_states, int num_actions, std::vector<double> probabilities);

  static Policy deterministic(int num_actions, std::span<const ActionId> actions);
  static Policy constant(int num_states, int num_actions, ActionId action);
  static Policy uniform(int num_states, int num_actions);
  // Each state's distribution is drawn independently from the seed; with
  // deterministic = true every state gets a single uniformly chosen action.
  static Policy random(int num_states, int num_actions, std::uint64_t seed, bool deterministic = false);

  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }
  double prob(StateId s, ActionId a) const {
    return probs_[static_cast<std::size_t>(s) * num_actions_ + static_cast<std::size_t>(a)];
  }
  std::span<const double> distribution(StateId s) const {
    return {probs_.data() + static_cast<std::size_t>(s) * num_actions_, static_cast<std::size_t>(num_actions_)};
  }
  bool is_deterministic() const;
  // The single action of a deterministic state; throws if the state is stochastic.
  ActionId action(StateId s) const;

  // Extends or overrides the distribution of one state.
  Policy with_distribution(StateId s, std::span<const double> dist) const;

  void check_compatible(const LayeredMdp& mdp) const;

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  int num_states_;
  int num_actions_;
  std::vector<double> probs_;
};

struct Atom {
  StateId state = kNoState;
  ActionId action = 0;
  double prob = 0.0;
  friend bool operator==(const Atom&, const Atom&) = default;
};

// Per level, a probability vector over state-action pairs of that level,
// stored by its explicit support.
class DataDistribution {
 public:
  explicit DataDistribution(std::vector<std::vector<Atom>> levels);

  static DataDistribution uniform_over(std::vector<std::vector<std::pair<StateId, ActionId>>> support);

  int horizon() const noexcept { return static_cast<int>(levels_.size()); }
  std::span<const Atom> level(int h) const { return levels_.at(h); }
  bool in_support(int h, StateId s, ActionId a) const;

  // Throws InvalidArgument if an atom lies outside the MDP's level h pairs.
  void check_compatible(const LayeredMdp& mdp) const;

  friend bool operator==(const DataDistribution&, const DataDistribution&) = default;

 private:
  std::vector<std::vector<Atom>> levels_;
};

struct Sample {
  StateId state = kNoState;
  ActionId action = 0;
  double reward = 0.0;
  StateId next = kNoState;  // kNoState at the last level
  friend bool operator==(const Sample&, const Sample&) = default;
};

// Offline data: N i.i.d. tuples per level plus the provenance of the draw.
struct OfflineDataset {
  std::vector<std::vector<Sample>> levels;
  StateId initial_state = kNoState;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  DataDistribution mu;

  int horizon() const noexcept { return static_cast<int>(levels.size()); }
};

}  // namespace oplab
