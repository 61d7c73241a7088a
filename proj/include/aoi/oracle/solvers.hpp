#pragma once

#include <aoi/agents/replay.hpp>
#include <aoi/oracle/mdp.hpp>
#include <aoi/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace aoi::oracle {

struct ValueTable {
  std::size_t actions = 0;
  std::vector<double> v;
  std::vector<double> q;  // states x actions
  std::vector<std::size_t> policy;
  std::vector<double> residuals;  // sup-norm Bellman residual per sweep

  double qv(std::size_t s, std::size_t a) const { return q[s * actions + a]; }
};

/// Valid actions whose q lies within tol of the best valid q.
inline std::vector<std::size_t> argmax_set(const DiscreteMdp& mdp, const ValueTable& t, std::size_t s,
                                           double tol = 1e-9) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < mdp.actions(); ++a)
    if (mdp.valid(s, a)) best = std::max(best, t.qv(s, a));
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < mdp.actions(); ++a)
    if (mdp.valid(s, a) && t.qv(s, a) >= best - tol) out.push_back(a);
  return out;
}

/// Fills v and policy from q: max over valid actions, lowest index on ties.
inline void greedy_from_q(const DiscreteMdp& mdp, ValueTable& t) {
  t.v.assign(mdp.states(), 0.0);
  t.policy.assign(mdp.states(), 0);
  for (std::size_t s = 0; s < mdp.states(); ++s) {
    std::size_t best = mdp.actions();
    for (std::size_t a = 0; a < mdp.actions(); ++a) {
      if (!mdp.valid(s, a)) continue;
      if (best == mdp.actions() || t.qv(s, a) > t.qv(s, best)) best = a;
    }
    t.policy[s] = best;
    t.v[s] = t.qv(s, best);
  }
}

inline void bellman_q(const DiscreteMdp& mdp, const std::vector<double>& v, std::vector<double>& q) {
  const std::size_t n_a = mdp.actions();
  q.assign(mdp.states() * n_a, 0.0);
  for (std::size_t s = 0; s < mdp.states(); ++s)
    for (std::size_t a = 0; a < n_a; ++a) {
      double ev = 0.0;
      const auto row = mdp.row(s, a);
      for (std::size_t s2 = 0; s2 < row.size(); ++s2) ev += row[s2] * v[s2];
      q[s * n_a + a] = mdp.reward(s, a) + mdp.gamma() * ev;
    }
}

/// Bellman optimality sweeps from v = 0 until the sup-norm residual drops
/// below tol. The returned q is T(v) for the final v.
inline ValueTable value_iteration(const DiscreteMdp& mdp, double tol, std::size_t max_sweeps = 1000000) {
  if (!(tol > 0.0)) throw Error("invalid_argument", "tolerance must be positive");
  mdp.validate();
  ValueTable t;
  t.actions = mdp.actions();
  std::vector<double> v(mdp.states(), 0.0);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    bellman_q(mdp, v, t.q);
    greedy_from_q(mdp, t);
    double residual = 0.0;
    for (std::size_t s = 0; s < v.size(); ++s) residual = std::max(residual, std::abs(t.v[s] - v[s]));
    t.residuals.push_back(residual);
    v = t.v;
    if (residual < tol) return t;
  }
  throw Error("no_convergence", "value iteration did not converge");
}

/// Expected discounted return of a fixed policy, by iterating its Bellman
/// operator to the given tolerance.
inline std::vector<double> evaluate_policy(const DiscreteMdp& mdp, const std::vector<std::size_t>& policy,
                                           double tol) {
  std::vector<double> v(mdp.states(), 0.0), next(mdp.states());
  for (;;) {
    double diff = 0.0;
    for (std::size_t s = 0; s < mdp.states(); ++s) {
      const auto row = mdp.row(s, policy[s]);
      double ev = 0.0;
      for (std::size_t s2 = 0; s2 < row.size(); ++s2) ev += row[s2] * v[s2];
      next[s] = mdp.reward(s, policy[s]) + mdp.gamma() * ev;
      diff = std::max(diff, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (diff < tol) return v;
  }
}

struct TabularQConfig {
  std::size_t episodes = 20000;
  std::size_t horizon = 50;
  double beta = 1.0;        // step size beta / n(s,a)^step_power
  double step_power = 1.0;
  agents::EpsilonSchedule epsilon{1.0, 1.0, 1.0};  // behaviour policy, per step
};

/// Sample-based Q-learning on the MDP. Every episode starts from a uniformly
/// drawn state and valid action (exploring starts), then follows an
/// epsilon-greedy behaviour policy for `horizon` steps.
inline ValueTable tabular_q(const DiscreteMdp& mdp, const TabularQConfig& cfg, Rng& rng) {
  if (!(cfg.beta > 0.0 && cfg.beta <= 1.0)) throw Error("invalid_argument", "beta must lie in (0,1]");
  mdp.validate();
  const std::size_t n_s = mdp.states(), n_a = mdp.actions();
  ValueTable t;
  t.actions = n_a;
  t.q.assign(n_s * n_a, 0.0);
  std::vector<std::uint64_t> visits(n_s * n_a, 0);
  std::vector<std::size_t> valid;

  auto valid_of = [&](std::size_t s) {
    valid.clear();
    for (std::size_t a = 0; a < n_a; ++a)
      if (mdp.valid(s, a)) valid.push_back(a);
    return valid;
  };
  auto best_valid = [&](std::size_t s) {
    std::size_t best = n_a;
    for (std::size_t a = 0; a < n_a; ++a)
      if (mdp.valid(s, a) && (best == n_a || t.q[s * n_a + a] > t.q[s * n_a + best])) best = a;
    return best;
  };

  std::uint64_t step = 0;
  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    std::size_t s = static_cast<std::size_t>(rng.below(n_s));
    const auto& first = valid_of(s);
    std::size_t a = first[static_cast<std::size_t>(rng.below(first.size()))];
    for (std::size_t k = 0; k < cfg.horizon; ++k, ++step) {
      const std::size_t s2 = mdp.sample_next(s, a, rng.uniform());
      const std::size_t i = s * n_a + a;
      const double n = static_cast<double>(++visits[i]);
      const double lr = cfg.beta / std::pow(n, cfg.step_power);
      const double target = mdp.reward(s, a) + mdp.gamma() * t.q[s2 * n_a + best_valid(s2)];
      t.q[i] += lr * (target - t.q[i]);
      s = s2;
      if (rng.uniform() < cfg.epsilon.value(step)) {
        const auto& opts = valid_of(s);
        a = opts[static_cast<std::size_t>(rng.below(opts.size()))];
      } else {
        a = best_valid(s);
      }
    }
  }
  // Unaffordable plans behave as NoSense.
  for (std::size_t s = 0; s < n_s; ++s)
    for (std::size_t a = 0; a < n_a; ++a)
      if (!mdp.valid(s, a)) t.q[s * n_a + a] = t.q[s * n_a];
  greedy_from_q(mdp, t);
  return t;
}

/// max over valid (s, a) of |q1 - q2|.
inline double q_distance(const DiscreteMdp& mdp, const ValueTable& a, const ValueTable& b) {
  double d = 0.0;
  for (std::size_t s = 0; s < mdp.states(); ++s)
    for (std::size_t x = 0; x < mdp.actions(); ++x)
      if (mdp.valid(s, x)) d = std::max(d, std::abs(a.qv(s, x) - b.qv(s, x)));
  return d;
}

/// Fraction of states whose chosen action lies in the VI argmax set.
inline double policy_agreement(const DiscreteMdp& mdp, const ValueTable& vi,
                               const std::vector<std::size_t>& policy, double tol = 1e-9) {
  std::size_t hits = 0;
  for (std::size_t s = 0; s < mdp.states(); ++s) {
    const auto best = argmax_set(mdp, vi, s, tol);
    hits += std::find(best.begin(), best.end(), policy[s]) != best.end();
  }
  return static_cast<double>(hits) / static_cast<double>(mdp.states());
}

}  // namespace aoi::oracle
