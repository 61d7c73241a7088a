#pragma once

#include <aoi/agents/q_agent.hpp>
#include <aoi/env/environment.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace aoi::agents {

inline constexpr std::size_t kStateFeatures = 4;

/// Network input for an EnvState:
///   aoi / a_max, battery / b_max, harvest / (mean + 4 sd), and a power
///   reading that keeps "not sensed" (-1), "sensed idle" (0) and detected
///   activity (0.5 .. 2.5, growing with the received power) apart.
class StateEncoder {
 public:
  explicit StateEncoder(const env::EnvConfig& cfg)
      : a_max_(cfg.a_max),
        b_max_(cfg.b_max),
        e_scale_(cfg.harvester.mean + 4.0 * cfg.harvester.spread()),
        n0_(cfg.sensing.n0_dbm),
        span_(cfg.sensing.n_th_dbm - cfg.sensing.n0_dbm) {}

  std::vector<double> operator()(const env::EnvState& s) const {
    return {static_cast<double>(s.aoi) / a_max_, s.battery / b_max_, s.harvested / e_scale_,
            power_feature(s)};
  }

  double power_feature(const env::EnvState& s) const {
    switch (s.observation) {
      case env::Observation::none: return -1.0;
      case env::Observation::idle: return 0.0;
      default: return 1.0 + std::clamp((s.p_r_dbm - n0_) / span_, -0.5, 1.5);
    }
  }

 private:
  double a_max_, b_max_, e_scale_, n0_, span_;
};

/// Overlay-only reference rule: sense whenever affordable and update only
/// when the latest reading is idle (or unknown); after a busy reading just
/// sense again.
inline env::Action baseline_overlay_policy(const env::EnvState& /*state*/, env::Observation observation,
                                           env::ActionMask mask) {
  if (!mask.contains(env::Action::silent)) return env::Action::no_sense;
  const bool busy = observation == env::Observation::active_below ||
                    observation == env::Observation::active_above;
  if (!busy && mask.contains(env::Action::overlay)) return env::Action::overlay;
  return env::Action::silent;
}

inline env::Action random_policy(env::ActionMask mask, Rng& rng) { return uniform_from_mask(mask, rng); }

struct SlotRecord {
  double reward = 0.0;
  int aoi = 1;  // a_t at the start of the slot
  double rate = 0.0;
  env::Action action = env::Action::no_sense;
  env::Action realized = env::Action::no_sense;
  int case_id = 1;
};

struct EpisodeRecord {
  std::vector<SlotRecord> slots;

  double total_reward() const {
    return std::accumulate(slots.begin(), slots.end(), 0.0,
                           [](double acc, const SlotRecord& r) { return acc + r.reward; });
  }
  double mean_aoi() const {
    if (slots.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : slots) s += r.aoi;
    return s / static_cast<double>(slots.size());
  }
  double mean_rate() const {
    if (slots.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : slots) s += r.rate;
    return s / static_cast<double>(slots.size());
  }
};

/// Fraction of slots ending in a successful update (cases 2 and 6).
inline double access_fraction(const std::vector<SlotRecord>& slots) {
  if (slots.empty()) throw Error("empty_records", "access fraction of an empty record");
  std::size_t hits = 0;
  for (const auto& r : slots) hits += env::is_success(r.case_id);
  return static_cast<double>(hits) / static_cast<double>(slots.size());
}

inline double access_fraction(const EpisodeRecord& ep) { return access_fraction(ep.slots); }

/// Drives one episode with any chooser Action(const EnvState&, ActionMask).
template <typename Chooser>
EpisodeRecord run_policy_episode(env::Environment& e, std::uint64_t episode, std::size_t horizon,
                                 Chooser&& choose) {
  EpisodeRecord rec;
  rec.slots.reserve(horizon);
  e.reset(episode);
  for (std::size_t t = 0; t < horizon; ++t) {
    const env::EnvState s = e.state();
    const env::Action a = choose(s, e.valid_actions());
    const env::StepOutcome out = e.step(a);
    rec.slots.push_back({out.reward, s.aoi, out.rate, a, out.realized, out.case_id});
  }
  return rec;
}

inline EpisodeRecord run_baseline_episode(env::Environment& e, std::uint64_t episode, std::size_t horizon) {
  return run_policy_episode(e, episode, horizon, [](const env::EnvState& s, env::ActionMask m) {
    return baseline_overlay_policy(s, s.observation, m);
  });
}

/// Training mode explores with the agent's epsilon schedule and learns from
/// every transition; evaluation mode is greedy and leaves the agent untouched.
inline EpisodeRecord run_episode(QAgent& agent, env::Environment& e, std::uint64_t episode, bool train,
                                 std::size_t horizon) {
  const StateEncoder encode(e.config());
  EpisodeRecord rec;
  rec.slots.reserve(horizon);
  e.reset(episode);
  std::vector<double> f = encode(e.state());
  for (std::size_t t = 0; t < horizon; ++t) {
    const env::EnvState s = e.state();
    const env::ActionMask mask = e.valid_actions();
    const env::Action a = train ? agent.act(f, mask, agent.epsilon()) : agent.greedy(f, mask);
    const env::StepOutcome out = e.step(a);
    std::vector<double> f_next = encode(out.next_state);
    if (train) {
      const bool done = agent.config().terminal_at_horizon && t + 1 == horizon;
      agent.observe({f, env::index_of(a), out.reward, f_next, done});
    }
    rec.slots.push_back({out.reward, s.aoi, out.rate, a, out.realized, out.case_id});
    f = std::move(f_next);
  }
  return rec;
}

}  // namespace aoi::agents
