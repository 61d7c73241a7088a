#pragma once

// Trains a deep Q agent directly on the oracle MDP (state fully observed)
// so its greedy policy can be compared with value iteration.

#include <aoi/agents/q_agent.hpp>
#include <aoi/oracle/mdp.hpp>
#include <aoi/oracle/solvers.hpp>

#include <vector>

namespace aoi::oracle {

inline std::vector<double> mdp_features(const StateIndex& idx, std::size_t s) {
  return {static_cast<double>(idx.aoi(s) - 1) / (idx.aoi_levels - 1),
          static_cast<double>(idx.battery(s)) / (idx.battery_levels - 1), idx.pu_active(s) ? 1.0 : 0.0};
}

inline env::ActionMask mdp_mask(const DiscreteMdp& mdp, std::size_t s) {
  env::ActionMask m;
  for (std::size_t a = 0; a < mdp.actions(); ++a)
    if (mdp.valid(s, a)) m.insert(env::action_at(a));
  return m;
}

struct DeepCheckConfig {
  agents::AgentConfig agent{};
  std::size_t episodes = 400;
  std::size_t horizon = 50;
};

struct DeepCheckResult {
  std::vector<std::size_t> policy;
  double agreement = 0.0;
  std::uint64_t updates = 0;
};

/// Each episode starts from a uniformly drawn state; the agent's own
/// epsilon schedule drives exploration.
inline DeepCheckResult train_on_mdp(const MdpModel& model, const ValueTable& vi, const DeepCheckConfig& cfg,
                                    std::uint64_t seed) {
  const DiscreteMdp& mdp = model.mdp;
  agents::AgentConfig ac = cfg.agent;
  ac.gamma = mdp.gamma();
  agents::QAgent agent(ac, 3, seed);
  Rng world(derive_key(seed, 0x3D9));
  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    std::size_t s = static_cast<std::size_t>(world.below(mdp.states()));
    for (std::size_t k = 0; k < cfg.horizon; ++k) {
      const std::vector<double> f = mdp_features(model.index, s);
      const env::Action a = agent.act(f, mdp_mask(mdp, s), agent.epsilon());
      const std::size_t x = env::index_of(a);
      const std::size_t s2 = mdp.sample_next(s, x, world.uniform());
      agent.observe({f, x, mdp.reward(s, x), mdp_features(model.index, s2), false});
      s = s2;
    }
  }
  DeepCheckResult r;
  r.policy.resize(mdp.states());
  for (std::size_t s = 0; s < mdp.states(); ++s)
    r.policy[s] = env::index_of(agent.greedy(mdp_features(model.index, s), mdp_mask(mdp, s)));
  r.agreement = policy_agreement(mdp, vi, r.policy);
  r.updates = agent.updates();
  return r;
}

}  // namespace aoi::oracle
