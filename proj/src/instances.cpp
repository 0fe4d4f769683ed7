#include "oplab/instances.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oplab/dynamic_programming.hpp"
#include "oplab/rng.hpp"

namespace oplab {

namespace {

Eigen::MatrixXd basis(int d, std::optional<std::uint64_t> rotation_seed) {
  return rotation_seed ? random_orthogonal(d, *rotation_seed) : Eigen::MatrixXd::Identity(d, d);
}

std::string state_label(int h, const std::string& tag) { return "s_" + std::to_string(h) + "^" + tag; }

}  // namespace

std::string to_string(InstanceKind kind) { return kind == InstanceKind::Deterministic ? "det" : "sparse"; }

InstanceKind parse_instance_kind(const std::string& name) {
  if (name == "det" || name == "deterministic") return InstanceKind::Deterministic;
  if (name == "sparse") return InstanceKind::Sparse;
  throw InvalidArgument("unknown instance kind: " + name);
}

Eigen::MatrixXd random_orthogonal(int d, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x0b7aULL));
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = rng.normal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign convention that makes the draw Haar distributed.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

double max_r0(InstanceKind kind, int d, int horizon) {
  if (kind == InstanceKind::Deterministic) return std::pow(d / 2, -horizon / 2.0);
  return std::pow(d / 2 - 1, -(horizon - 2) / 2.0);
}

HardInstanceBundle build_det_instance(int d, int horizon, double r0, const DetInstanceOptions& options) {
  if (d < 4 || d % 2 != 0) throw InvalidArgument("deterministic instance needs an even d >= 4");
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  const int dh = d / 2;
  const int H = horizon;

  std::vector<double> w(dh, 1.0 / std::sqrt(static_cast<double>(dh)));
  if (options.hub_weights) {
    if (static_cast<int>(options.hub_weights->size()) != dh) throw InvalidArgument("hub weights need d/2 entries");
    w = *options.hub_weights;
  }
  const double W = std::accumulate(w.begin(), w.end(), 0.0);
  const double r0_cap = options.hub_weights ? (W >= 1.0 ? std::pow(W, -H) : 1.0) : max_r0(InstanceKind::Deterministic, d, H);
  if (!(r0 >= 0.0 && r0 <= r0_cap)) throw InvalidArgument("r0 outside [0, " + std::to_string(r0_cap) + "]");

  std::vector<std::vector<std::string>> labels(H);
  for (int h = 0; h < H; ++h)
    for (int c = 1; c <= dh + 1; ++c) labels[h].push_back(state_label(h + 1, std::to_string(c)));
  MdpBuilder b(std::move(labels), 2);
  const ActionId a1 = 0;
  const ActionId a2 = 1;

  for (int h = 0; h < H; ++h) {
    const StateId hub = b.state(h, dh);
    // Hub value at level h is r0 * W^{H-h}; its reward is the increment over the next hub.
    const double hub_reward = h + 1 < H ? (W - 1.0) * std::pow(W, H - h - 1) * r0 : W * r0;
    for (ActionId a : {a1, a2}) b.set_reward(hub, a, RewardModel::deterministic(hub_reward));
    for (int c = 0; c <= dh; ++c) {
      const StateId s = b.state(h, c);
      if (h + 1 < H) {
        b.set_deterministic_transition(s, a1, b.state(h + 1, dh));
        b.set_deterministic_transition(s, a2, b.state(h + 1, c));
      } else if (c < dh) {
        for (ActionId a : {a1, a2}) b.set_reward(s, a, RewardModel::two_point((1.0 + r0) / 2.0));
      }
    }
  }
  b.set_initial_state(b.state(0, dh));
  LayeredMdp mdp = b.build();

  const Eigen::MatrixXd e = basis(d, options.rotation_seed);
  Eigen::VectorXd hub_feature = Eigen::VectorXd::Zero(d);
  for (int c = 0; c < dh; ++c) hub_feature += w[c] * e.col(c);
  Eigen::MatrixXd table(static_cast<Eigen::Index>(mdp.num_states()) * 2, d);
  std::vector<std::vector<std::pair<StateId, ActionId>>> support(H);
  for (int h = 0; h < H; ++h) {
    for (int c = 0; c <= dh; ++c) {
      const StateId s = mdp.level_begin(h) + c;
      if (c < dh) {
        table.row(mdp.index(s, a1)) = e.col(c).transpose();
        table.row(mdp.index(s, a2)) = e.col(c + dh).transpose();
        support[h].emplace_back(s, a1);
        support[h].emplace_back(s, a2);
      } else {
        table.row(mdp.index(s, a1)) = hub_feature.transpose();
        table.row(mdp.index(s, a2)) = hub_feature.transpose();
      }
    }
  }
  FeatureMap phi(mdp.num_states(), 2, std::move(table));
  auto mu = DataDistribution::uniform_over(std::move(support));
  auto pi = Policy::constant(mdp.num_states(), 2, a1);
  const double value = exact_policy_value(mdp, pi);
  return HardInstanceBundle{InstanceKind::Deterministic,
                            d,
                            H,
                            dh,
                            r0,
                            r0_cap,
                            std::move(mdp),
                            std::move(phi),
                            std::move(mu),
                            std::move(pi),
                            std::nullopt,
                            value};
}

HardInstanceBundle build_sparse_instance(int d, int horizon, double r0, std::optional<std::uint64_t> rotation_seed) {
  if (d < 6 || d % 2 != 0) throw InvalidArgument("sparse instance needs an even d >= 6");
  if (horizon < 4) throw InvalidArgument("sparse instance needs horizon >= 4");
  const int dh = d / 2 - 1;
  const int H = horizon;
  const double cap = max_r0(InstanceKind::Sparse, d, H);
  if (!(r0 >= 0.0 && r0 <= cap)) throw InvalidArgument("r0 outside [0, " + std::to_string(cap) + "]");

  // Per level >= 2: s^1..s^dh, the hub s^{dh+1}, s^+, s^-.
  const int hub = dh;
  const int plus = dh + 1;
  const int minus = dh + 2;
  std::vector<std::vector<std::string>> labels(H);
  labels[0].push_back("s_1");
  for (int h = 1; h < H; ++h) {
    for (int c = 1; c <= dh + 1; ++c) labels[h].push_back(state_label(h + 1, std::to_string(c)));
    labels[h].push_back(state_label(h + 1, "+"));
    labels[h].push_back(state_label(h + 1, "-"));
  }
  MdpBuilder b(std::move(labels), d);
  const StateId root = b.state(0, 0);

  for (ActionId a = 0; a < d; ++a) {
    int target = hub;
    if (a < dh) target = a;
    else if (a == dh) target = plus;
    else if (a == dh + 1) target = minus;
    b.set_deterministic_transition(root, a, b.state(1, target));
  }

  auto coin = [&](int h, double bias) {
    bias = std::min(bias, 1.0);  // rounding at the maximal r0
    return std::vector<Successor>{{b.state(h, plus), (1.0 + bias) / 2.0}, {b.state(h, minus), (1.0 - bias) / 2.0}};
  };
  for (int h = 1; h + 1 < H; ++h) {
    const bool second_last = h == H - 2;
    // One-based level h+1; the hub's coin is biased by r0 * d_hat^{(H-(h+1))/2}.
    const double hub_bias = r0 * std::pow(dh, (H - h - 1) / 2.0);
    for (ActionId a = 0; a < d; ++a) {
      for (int c = 0; c < dh; ++c) {
        if (second_last) b.set_transition(b.state(h, c), a, coin(h + 1, r0));
        else b.set_deterministic_transition(b.state(h, c), a, b.state(h + 1, hub));
      }
      b.set_deterministic_transition(b.state(h, plus), a, b.state(h + 1, plus));
      b.set_deterministic_transition(b.state(h, minus), a, b.state(h + 1, minus));
      if (a < dh) b.set_deterministic_transition(b.state(h, hub), a, b.state(h + 1, a));
      else b.set_transition(b.state(h, hub), a, coin(h + 1, hub_bias));
    }
  }
  for (ActionId a = 0; a < d; ++a) {
    b.set_reward(b.state(H - 1, plus), a, RewardModel::deterministic(1.0));
    b.set_reward(b.state(H - 1, minus), a, RewardModel::deterministic(-1.0));
  }
  b.set_initial_state(root);
  LayeredMdp mdp = b.build();

  const Eigen::MatrixXd e = basis(d, rotation_seed);
  Eigen::VectorXd hub_feature = Eigen::VectorXd::Zero(d);
  for (int c = 0; c < dh; ++c) hub_feature += e.col(c) / std::sqrt(static_cast<double>(dh));
  Eigen::MatrixXd table(static_cast<Eigen::Index>(mdp.num_states()) * d, d);
  for (ActionId a = 0; a < d; ++a) table.row(mdp.index(root, a)) = e.col(a).transpose();
  std::vector<std::vector<std::pair<StateId, ActionId>>> support(H);
  for (ActionId a = 0; a < d; ++a) support[0].emplace_back(root, a);
  for (int h = 1; h < H; ++h) {
    const StateId first = mdp.level_begin(h);
    for (ActionId a = 0; a < d; ++a) {
      for (int c = 0; c < dh; ++c) table.row(mdp.index(first + c, a)) = e.col(c).transpose();
      table.row(mdp.index(first + plus, a)) = e.col(dh).transpose();
      table.row(mdp.index(first + minus, a)) = e.col(dh + 1).transpose();
      table.row(mdp.index(first + hub, a)) = a < dh ? Eigen::VectorXd(e.col(dh + 2 + a)).transpose() : hub_feature.transpose();
    }
    for (int c = 0; c < dh; ++c) support[h].emplace_back(first + c, 0);
    support[h].emplace_back(first + plus, 0);
    support[h].emplace_back(first + minus, 0);
    for (ActionId a = 0; a < dh; ++a) support[h].emplace_back(first + hub, a);
  }
  FeatureMap phi(mdp.num_states(), d, std::move(table));
  auto mu = DataDistribution::uniform_over(std::move(support));

  auto pi = Policy::constant(mdp.num_states(), d, d - 1);
  std::vector<double> data_probs(static_cast<std::size_t>(mdp.num_states()) * d, 0.0);
  for (ActionId a = 0; a < d; ++a) data_probs[mdp.index(root, a)] = 1.0 / d;
  for (int h = 1; h < H; ++h) {
    const StateId first = mdp.level_begin(h);
    for (int k = 0; k < mdp.level_size(h); ++k) {
      if (k == hub) {
        for (ActionId a = 0; a < dh; ++a) data_probs[mdp.index(first + k, a)] = 1.0 / dh;
      } else {
        data_probs[mdp.index(first + k, 0)] = 1.0;
      }
    }
  }
  Policy data_policy(mdp.num_states(), d, std::move(data_probs));
  const double value = exact_policy_value(mdp, pi);
  return HardInstanceBundle{InstanceKind::Sparse, d,
                            H,                    dh,
                            r0,                   cap,
                            std::move(mdp),       std::move(phi),
                            std::move(mu),        std::move(pi),
                            std::move(data_policy), value};
}

HardInstanceBundle build_instance(InstanceKind kind, int d, int horizon, double r0) {
  return kind == InstanceKind::Deterministic ? build_det_instance(d, horizon, r0)
                                             : build_sparse_instance(d, horizon, r0);
}

ReducedInstance build_optimality_reduction(const HardInstanceBundle& bundle) {
  const LayeredMdp& inner = bundle.mdp;
  const int A = inner.num_actions();
  const int H = inner.horizon();
  const int d = bundle.phi.dim();

  std::vector<std::vector<std::string>> labels(H + 1);
  labels[0].push_back("root");
  for (int h = 0; h < H; ++h) {
    for (StateId s = inner.level_begin(h); s < inner.level_end(h); ++s) labels[h + 1].push_back(inner.label(s));
    labels[h + 1].push_back("done_" + std::to_string(h + 2));
  }
  MdpBuilder b(std::move(labels), A);
  auto lift = [&](StateId s) {
    const int h = inner.level_of(s);
    return b.state(h + 1, s - inner.level_begin(h));
  };
  auto done = [&](int level) { return b.state(level, inner.level_size(level - 1)); };

  const StateId root = b.state(0, 0);
  b.set_deterministic_transition(root, 0, done(1));
  b.set_reward(root, 0, RewardModel::deterministic(0.5));
  for (ActionId a = 1; a < A; ++a) b.set_deterministic_transition(root, a, lift(inner.initial_state()));

  for (int h = 0; h < H; ++h) {
    for (StateId s = inner.level_begin(h); s < inner.level_end(h); ++s) {
      for (ActionId a = 0; a < A; ++a) {
        b.set_reward(lift(s), a, inner.reward(s, a));
        if (h + 1 < H) {
          std::vector<Successor> row;
          for (const auto& succ : inner.successors(s, a)) row.push_back({lift(succ.state), succ.prob});
          b.set_transition(lift(s), a, std::move(row));
        }
      }
    }
    if (h + 1 < H)
      for (ActionId a = 0; a < A; ++a) b.set_deterministic_transition(done(h + 1), a, done(h + 2));
  }
  b.set_initial_state(root);
  LayeredMdp mdp = b.build();

  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mdp.num_states()) * A, d + 2);
  table(mdp.index(root, 0), d) = 1.0;
  for (ActionId a = 1; a < A; ++a) table(mdp.index(root, a), d + 1) = 1.0;
  std::vector<double> eval_probs(static_cast<std::size_t>(mdp.num_states()) * A, 0.0);
  eval_probs[mdp.index(root, 1)] = 1.0;
  for (int h = 0; h < H; ++h) {
    for (StateId s = inner.level_begin(h); s < inner.level_end(h); ++s) {
      for (ActionId a = 0; a < A; ++a) {
        table.block(mdp.index(lift(s), a), 0, 1, d) = bundle.phi(s, a).transpose();
        eval_probs[mdp.index(lift(s), a)] = bundle.eval_policy.prob(s, a);
      }
    }
    for (ActionId a = 0; a < A; ++a) table(mdp.index(done(h + 1), a), d) = 1.0;
    eval_probs[mdp.index(done(h + 1), 0)] = 1.0;
  }

  std::vector<std::vector<Atom>> levels(H + 1);
  levels[0] = {{root, 0, 0.5}, {root, 1, 0.5}};
  for (int h = 0; h < H; ++h)
    for (const auto& atom : bundle.mu.level(h)) levels[h + 1].push_back({lift(atom.state), atom.action, atom.prob});

  const int S = mdp.num_states();
  return ReducedInstance{std::move(mdp), FeatureMap(S, A, std::move(table)), DataDistribution(std::move(levels)),
                         Policy(S, A, std::move(eval_probs))};
}

}  // namespace oplab
