#pragma once

#include <aoi/env/model.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace aoi::env {

/// Every knob of the simulated world. Energy is in abstract units.
struct EnvConfig {
  PuChain pu{};
  SensingModel sensing{};
  Harvester harvester{};
  double b_max = 10.0;
  double b0 = 10.0;
  EnergyCosts costs{};
  Geometry geometry{};  // su_pos is re-drawn at every reset
  double r_min = 2.0;   // SU placement annulus around the PU
  double r_max = 100.0;
  double rayleigh_scale = 1.0;
  double xi = 1.0;
  int a_max = 100;

  /// Update cost clamp tracks the battery capacity.
  EnergyCosts effective_costs() const {
    EnergyCosts c = costs;
    c.update_cap = b_max;
    return c;
  }

  void validate() const {
    pu.validate();
    sensing.validate();
    harvester.validate();
    costs.validate();
    if (!(b_max > 0.0)) throw Error("invalid_config", "b_max must be positive");
    if (!(b0 >= 0.0 && b0 <= b_max)) throw Error("invalid_config", "b0 must lie in [0, b_max]");
    if (!(geometry.d0 > 0.0)) throw Error("invalid_config", "d0 must be positive");
    if (!(geometry.omega >= 2.0)) throw Error("invalid_config", "path-loss exponent must be >= 2");
    if (!(geometry.freq_hz > 0.0)) throw Error("invalid_config", "carrier frequency must be positive");
    if (!(geometry.shadow_var_db >= 0.0)) throw Error("invalid_config", "shadowing variance must be >= 0");
    if (!(r_min > 0.0 && r_max >= r_min)) throw Error("invalid_config", "placement annulus must satisfy 0 < r_min <= r_max");
    if (!(rayleigh_scale > 0.0)) throw Error("invalid_config", "rayleigh scale must be positive");
    if (a_max < 1) throw Error("invalid_config", "a_max must be >= 1");
    if (!std::isfinite(xi)) throw Error("invalid_config", "xi must be finite");
  }
};

/// Fading, shadowing and PU activity for the next slot.
inline WorldState advance_world(bool pu_active, const EnvConfig& cfg, Rng& rng) {
  WorldState w;
  w.pu_active = step_pu(pu_active, cfg.pu, rng);
  w.channel_gain = sample_channel(cfg.rayleigh_scale, rng);
  w.shadow_db = sample_shadowing(cfg.geometry.shadow_var_db, rng);
  return w;
}

struct StepResult {
  StepOutcome outcome;
  WorldState next_world;
};

/// One slot. The chosen action is the SU's plan; the sensing outcome of the
/// slot selects the branch that is actually executed:
///   idle          -> full-power update if the plan updates (case 2, or 3 on
///                    a collision), otherwise sense only (case 4)
///   active, above -> silent (case 5)
///   active, below -> plans with a location report ask the central entity
///                    for power: zero grant is case 8, a positive grant is an
///                    underlay update (case 6) or, without U, case 7; plans
///                    without a report stay silent (case 7)
/// Random draws are consumed in a fixed order independent of the action, so
/// different policies see identical worlds under the same stream.
inline StepResult env_step(const EnvState& s, const WorldState& w, Action action,
                           const EnvConfig& cfg, const Geometry& geom, Rng& rng) {
  const double u_sense = rng.uniform();
  const WorldState next_world = advance_world(w.pu_active, cfg, rng);
  const double next_harvest = sample_energy(cfg.harvester, rng);

  const EnergyCosts costs = cfg.effective_costs();
  const Battery battery{s.battery, cfg.b_max};
  const double h = w.channel_gain;
  if (!check_causality(battery, action, h, costs))
    throw Error("causality_violated", "causality violated");

  const DecisionTuple plan = tuple_of(action);
  StepOutcome out;
  out.realized = Action::no_sense;
  out.case_id = static_cast<int>(SlotCase::idle_no_sense);
  PowerGrant tx;
  double reading = 0.0;

  if (plan.sense) {
    const double p_r = received_power(geom, w.pu_active, w.shadow_db);
    out.observation = sense_outcome(w.pu_active, p_r, cfg.sensing, u_sense);
    reading = w.pu_active ? p_r : cfg.sensing.n0_dbm;
    if (out.observation == Observation::idle) reading = cfg.sensing.n0_dbm;

    switch (out.observation) {
      case Observation::idle:
        if (plan.update) {
          out.realized = Action::overlay;
          tx = geom.p_full_dbm;
          out.collided = w.pu_active && p_r > cfg.sensing.n_th_dbm;
          out.case_id = static_cast<int>(out.collided ? SlotCase::overlay_collision
                                                      : SlotCase::overlay_success);
        } else {
          out.realized = Action::silent;
          out.case_id = static_cast<int>(SlotCase::sensed_idle_no_update);
        }
        break;
      case Observation::active_above:
        out.realized = Action::silent;
        out.case_id = static_cast<int>(SlotCase::sensed_above_silent);
        break;
      case Observation::active_below:
        if (plan.report_location) {
          const PowerGrant grant = allocate_power(geom, cfg.sensing);
          if (!grant) {
            out.realized = Action::underlay_denied;
            out.case_id = static_cast<int>(SlotCase::zero_grant);
          } else if (plan.update) {
            out.realized = Action::underlay;
            tx = grant;
            out.case_id = static_cast<int>(SlotCase::underlay_success);
          } else {
            out.realized = Action::underlay_denied;
            out.case_id = static_cast<int>(SlotCase::sensed_below_no_update);
          }
        } else {
          out.realized = Action::silent;
          out.case_id = static_cast<int>(SlotCase::sensed_below_no_update);
        }
        break;
      case Observation::none:
        break;
    }
  }

  const bool ack = is_success(out.case_id);
  out.rate = ack ? rate(tx, h, cfg.sensing.n0_dbm) : 0.0;
  out.reward = reward(s, out.case_id, out.rate, cfg.xi);

  const Battery next_battery = update_battery(battery, s.harvested, out.realized, h, costs);
  out.next_state.aoi = update_aoi(s.aoi, out.realized, ack, cfg.a_max);
  out.next_state.battery = next_battery.level;
  out.next_state.harvested = next_harvest;
  out.next_state.p_r_dbm = reading;
  out.next_state.observation = out.observation;
  return {out, next_world};
}

/// Stateful episode driver around env_step. Each (episode, slot) pair owns
/// its own counter-based stream derived from world_seed.
class Environment {
 public:
  Environment(EnvConfig cfg, std::uint64_t world_seed) : cfg_(std::move(cfg)), seed_(world_seed) {
    cfg_.validate();
  }

  const EnvState& reset(std::uint64_t episode) {
    episode_ = episode;
    slot_ = 0;
    Rng rng(derive_key(seed_, episode, 0));
    const double r2_min = cfg_.r_min * cfg_.r_min;
    const double r2_max = cfg_.r_max * cfg_.r_max;
    const double r = std::sqrt(r2_min + rng.uniform() * (r2_max - r2_min));
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    geom_ = cfg_.geometry;
    geom_.su_pos = {geom_.pu_pos.x + r * std::cos(theta), geom_.pu_pos.y + r * std::sin(theta)};

    world_.pu_active = rng.uniform() < cfg_.pu.stationary_active();
    world_.channel_gain = sample_channel(cfg_.rayleigh_scale, rng);
    world_.shadow_db = sample_shadowing(cfg_.geometry.shadow_var_db, rng);
    state_ = EnvState{};
    state_.aoi = 1;
    state_.battery = cfg_.b0;
    state_.harvested = sample_energy(cfg_.harvester, rng);
    return state_;
  }

  StepOutcome step(Action action) {
    Rng rng(derive_key(seed_, episode_, slot_ + 1));
    StepResult r = env_step(state_, world_, action, cfg_, geom_, rng);
    state_ = r.outcome.next_state;
    world_ = r.next_world;
    ++slot_;
    return r.outcome;
  }

  ActionMask valid_actions() const {
    return env::valid_actions(state_, world_.channel_gain, cfg_.effective_costs());
  }

  const EnvConfig& config() const noexcept { return cfg_; }
  const EnvState& state() const noexcept { return state_; }
  const WorldState& world() const noexcept { return world_; }
  const Geometry& geometry() const noexcept { return geom_; }
  std::uint64_t slot() const noexcept { return slot_; }

  /// Test hook: pin the episode's SU position.
  void place_su(Point p) { geom_.su_pos = p; }

 private:
  EnvConfig cfg_;
  std::uint64_t seed_;
  std::uint64_t episode_ = 0;
  std::uint64_t slot_ = 0;
  Geometry geom_{};
  WorldState world_{};
  EnvState state_{};
};

}  // namespace aoi::env
