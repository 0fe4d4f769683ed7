#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "oplab/instances.hpp"

namespace oplab::testing {

// Law of the sufficient statistic read straight off an instance: the mu mass
// of the informative pairs and the probability that one of them yields a +1.
struct InformativeLaw {
  double mass = 0.0;
  double plus = 0.0;
};

inline InformativeLaw informative_law(const HardInstanceBundle& b) {
  InformativeLaw law;
  const int H = b.mdp.horizon();
  if (b.kind == InstanceKind::Deterministic) {
    for (const auto& atom : b.mu.level(H - 1)) {
      const auto& r = b.mdp.reward(atom.state, atom.action);
      if (r.kind() != RewardKind::TwoPoint) continue;
      law.mass += atom.prob;
      law.plus = r.parameter();
    }
    return law;
  }
  const StateId first = b.mdp.level_begin(H - 2);
  const StateId target = b.mdp.level_begin(H - 1) + b.d_hat + 1;
  for (const auto& atom : b.mu.level(H - 2)) {
    if (atom.state - first >= b.d_hat) continue;
    law.mass += atom.prob;
    law.plus = 0.0;
    for (const auto& s : b.mdp.successors(atom.state, atom.action))
      if (s.state == target) law.plus += s.prob;
  }
  return law;
}

inline double log_binom_pmf(std::int64_t n, std::int64_t k, double p) {
  if (p <= 0.0) return k == 0 ? 0.0 : -INFINITY;
  if (p >= 1.0) return k == n ? 0.0 : -INFINITY;
  const double nn = static_cast<double>(n), kk = static_cast<double>(k);
  return std::lgamma(nn + 1) - std::lgamma(kk + 1) - std::lgamma(nn - kk + 1) + kk * std::log(p) +
         (nn - kk) * std::log1p(-p);
}

// Exact success probability of the likelihood-ratio test (ties split evenly)
// under a uniform prior on the two worlds, with N samples per level.
inline double exact_lrt_success(std::int64_t N, double mass, double q0, double q1, double gap) {
  const double lp = std::log1p(gap), lm = std::log1p(-gap);
  double total = 0.0;
  const double mean = static_cast<double>(N) * mass;
  const double sd = std::sqrt(static_cast<double>(N) * mass * (1.0 - mass));
  const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(mean - 12.0 * sd - 2.0));
  const auto hi = std::min<std::int64_t>(N, static_cast<std::int64_t>(mean + 12.0 * sd + 2.0));
  for (std::int64_t n = lo; n <= hi; ++n) {
    const double wn = std::exp(log_binom_pmf(N, n, mass));
    if (wn == 0.0) continue;
    double win = 0.0;
    for (std::int64_t k = 0; k <= n; ++k) {
      const double llr = static_cast<double>(k) * lp + static_cast<double>(n - k) * lm;
      const double p0 = std::exp(log_binom_pmf(n, k, q0));
      const double p1 = std::exp(log_binom_pmf(n, k, q1));
      if (llr > 0.0) win += p1;
      else if (llr < 0.0) win += p0;
      else win += 0.5 * (p0 + p1);
    }
    total += wn * 0.5 * win;
  }
  return total;
}

inline double exact_lrt_success(InstanceKind kind, int d, int horizon, std::int64_t N) {
  const auto null_world = build_instance(kind, d, horizon, 0.0);
  const auto alt_world = build_instance(kind, d, horizon, max_r0(kind, d, horizon));
  const auto l0 = informative_law(null_world);
  const auto l1 = informative_law(alt_world);
  return exact_lrt_success(N, l0.mass, l0.plus, l1.plus, alt_world.r0);
}

}  // namespace oplab::testing
