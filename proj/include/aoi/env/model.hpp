#pragma once

// Physical and decision primitives of the spectrum-sharing world: PU activity
// chain, sensing, Rayleigh fading, harvesting, battery and AoI bookkeeping,
// central-entity power grant, Shannon rate and the per-slot reward.

#include <aoi/error.hpp>
#include <aoi/rng.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace aoi::env {

inline constexpr double kSpeedOfLight = 3.0e8;

// ---------------------------------------------------------------------------
// Actions

/// The five admissible decision tuples (Z, L, W, U). Indices follow the
/// order of the admissible set and double as network output indices.
enum class Action : std::uint8_t {
  no_sense = 0,         // (0,0,0,0)
  silent = 1,           // (1,0,0,0)
  overlay = 2,          // (1,0,0,1)
  underlay = 3,         // (1,1,1,1)
  underlay_denied = 4,  // (1,1,1,0)
};

inline constexpr std::size_t kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions{
    Action::no_sense, Action::silent, Action::overlay, Action::underlay, Action::underlay_denied};

struct DecisionTuple {
  bool sense = false;            // Z
  bool report_location = false;  // L
  bool wait_grant = false;       // W
  bool update = false;           // U

  friend constexpr bool operator==(const DecisionTuple&, const DecisionTuple&) = default;
};

constexpr std::size_t index_of(Action a) noexcept { return static_cast<std::size_t>(a); }
constexpr Action action_at(std::size_t i) noexcept { return kAllActions[i]; }

constexpr DecisionTuple tuple_of(Action a) noexcept {
  switch (a) {
    case Action::no_sense: return {false, false, false, false};
    case Action::silent: return {true, false, false, false};
    case Action::overlay: return {true, false, false, true};
    case Action::underlay: return {true, true, true, true};
    case Action::underlay_denied: return {true, true, true, false};
  }
  return {};
}

/// Only tuples in the admissible set map back to an Action.
constexpr std::optional<Action> action_from_tuple(DecisionTuple t) noexcept {
  for (Action a : kAllActions)
    if (tuple_of(a) == t) return a;
  return std::nullopt;
}

constexpr std::string_view name_of(Action a) noexcept {
  switch (a) {
    case Action::no_sense: return "no_sense";
    case Action::silent: return "silent";
    case Action::overlay: return "overlay";
    case Action::underlay: return "underlay";
    case Action::underlay_denied: return "underlay_denied";
  }
  return "?";
}

/// Subset of the five actions.
class ActionMask {
 public:
  constexpr ActionMask() = default;
  static constexpr ActionMask all() noexcept { return ActionMask{0x1F}; }
  static constexpr ActionMask only(Action a) noexcept {
    return ActionMask{static_cast<std::uint8_t>(1u << index_of(a))};
  }

  constexpr bool contains(Action a) const noexcept { return (bits_ >> index_of(a)) & 1u; }
  constexpr void insert(Action a) noexcept { bits_ |= static_cast<std::uint8_t>(1u << index_of(a)); }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::size_t size() const noexcept {
    std::size_t n = 0;
    for (Action a : kAllActions) n += contains(a);
    return n;
  }
  constexpr std::uint8_t bits() const noexcept { return bits_; }

  friend constexpr bool operator==(ActionMask, ActionMask) = default;

 private:
  constexpr explicit ActionMask(std::uint8_t bits) : bits_(bits) {}
  std::uint8_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Model parameters

struct PuChain {
  double p_ia = 0.4;  // inactive -> active
  double p_ai = 0.3;  // active -> inactive

  double p_ii() const noexcept { return 1.0 - p_ia; }
  double p_aa() const noexcept { return 1.0 - p_ai; }
  /// Long-run fraction of slots with the PU active.
  double stationary_active() const noexcept {
    const double s = p_ia + p_ai;
    return s > 0.0 ? p_ia / s : 0.5;
  }

  void validate() const {
    if (!(p_ia >= 0.0 && p_ia <= 1.0 && p_ai >= 0.0 && p_ai <= 1.0))
      throw Error("invalid_config", "pu chain probabilities must lie in [0,1]");
  }
};

struct SensingModel {
  double p_f = 0.1;
  double p_d = 0.9;
  double n0_dbm = -80.0;
  double n_th_dbm = -60.0;

  void validate() const {
    if (!(p_f >= 0.0 && p_f < p_d && p_d <= 1.0))
      throw Error("invalid_config", "sensing requires 0 <= p_f < p_d <= 1");
    if (!(n0_dbm < n_th_dbm)) throw Error("invalid_config", "sensing requires n0_dbm < n_th_dbm");
  }
};

enum class HarvestMode : std::uint8_t { poisson, truncated_normal };

struct Harvester {
  HarvestMode mode = HarvestMode::poisson;
  double mean = 3.0;
  double std = 0.5;  // truncated_normal only

  /// Standard deviation of the untruncated law.
  double spread() const noexcept {
    return mode == HarvestMode::poisson ? std::sqrt(mean) : std;
  }

  void validate() const {
    if (!(mean > 0.0)) throw Error("invalid_config", "harvest mean must be positive");
    if (mode == HarvestMode::truncated_normal && !(std >= 0.0 && mean >= 4.0 * std))
      throw Error("invalid_config", "normal harvesting requires mean >= 4*std");
  }
};

struct EnergyCosts {
  double alpha = 3.0;  // sensing
  double delta = 1.0;  // location report
  double update_cap = 10.0;

  /// Channel-inversion update cost 1/h, clamped at update_cap.
  double update_cost(double h) const noexcept {
    if (!(h > 0.0)) return update_cap;
    return std::min(1.0 / h, update_cap);
  }

  void validate() const {
    if (!(alpha > 0.0 && delta > 0.0 && update_cap > 0.0))
      throw Error("invalid_config", "energy costs must be positive");
  }
};

struct Battery {
  double level = 0.0;
  double capacity = 10.0;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Link geometry of one episode (positions fixed within an episode).
struct Geometry {
  Point pu_pos{};
  Point su_pos{10.0, 0.0};
  double d0 = 1.0;
  double omega = 3.0;
  double shadow_var_db = 6.0;
  double freq_hz = 2.4e9;
  double p_pu_dbm = 10.0;
  double p_full_dbm = 20.0;

  double distance() const noexcept { return std::hypot(pu_pos.x - su_pos.x, pu_pos.y - su_pos.y); }
  double wavelength() const noexcept { return kSpeedOfLight / freq_hz; }
  /// Constant path-loss term 20 log10(lambda / (4 pi d0)) in dB.
  double k_db() const noexcept {
    return 20.0 * std::log10(wavelength() / (4.0 * std::numbers::pi * d0));
  }
};

// ---------------------------------------------------------------------------
// State

enum class Observation : std::uint8_t { none, idle, active_below, active_above };

constexpr std::string_view name_of(Observation o) noexcept {
  switch (o) {
    case Observation::none: return "none";
    case Observation::idle: return "idle";
    case Observation::active_below: return "active_below";
    case Observation::active_above: return "active_above";
  }
  return "?";
}

/// What the SU knows at the start of a slot.
struct EnvState {
  int aoi = 1;
  double battery = 0.0;
  double harvested = 0.0;  // e_t, creditable from the next slot on
  double p_r_dbm = 0.0;    // last sensed power; 0 when the last slot did not sense
  Observation observation = Observation::none;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

/// Hidden ground truth of a slot.
struct WorldState {
  bool pu_active = false;
  double channel_gain = 1.0;  // |h_t|
  double shadow_db = 0.0;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// Observation cases 1..8 of a slot.
enum class SlotCase : int {
  idle_no_sense = 1,
  overlay_success = 2,
  overlay_collision = 3,
  sensed_idle_no_update = 4,
  sensed_above_silent = 5,
  underlay_success = 6,
  sensed_below_no_update = 7,
  zero_grant = 8,
};

struct StepOutcome {
  EnvState next_state;
  double reward = 0.0;
  int case_id = 1;
  double rate = 0.0;
  bool collided = false;
  Action realized = Action::no_sense;
  Observation observation = Observation::none;
};

// ---------------------------------------------------------------------------
// Operations

/// Next PU activity drawn from the row of the current state.
inline bool step_pu(bool pu_active, const PuChain& chain, Rng& rng) {
  const double u = rng.uniform();
  return pu_active ? u >= chain.p_ai : u < chain.p_ia;
}

/// Rayleigh-distributed |h| by inversion; strictly positive.
inline double sample_channel(double scale, Rng& rng) {
  return scale * std::sqrt(-2.0 * std::log(rng.uniform_open()));
}

inline double sample_energy(const Harvester& h, Rng& rng) {
  if (h.mode == HarvestMode::poisson) {
    std::poisson_distribution<int> dist(h.mean);
    return static_cast<double>(dist(rng));
  }
  std::normal_distribution<double> dist(h.mean, h.std);
  return std::max(0.0, dist(rng));
}

inline double sample_shadowing(double var_db, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(var_db));
  return dist(rng);
}

/// PU power received at the SU in dBm; -inf when the PU is silent.
inline double received_power(const Geometry& g, bool pu_active, double shadow_db) {
  const double d = g.distance();
  if (!(d > 0.0)) throw Error("degenerate_geometry", "degenerate geometry");
  if (!pu_active) return -std::numeric_limits<double>::infinity();
  return g.p_pu_dbm + g.k_db() - 10.0 * g.omega * std::log10(d / g.d0) - shadow_db;
}

/// Outcome of energy detection given a uniform draw u.
inline Observation sense_outcome(bool pu_active, double p_r_dbm, const SensingModel& m, double u) {
  if (!pu_active) return u < m.p_f ? Observation::active_below : Observation::idle;
  if (u >= m.p_d) return Observation::idle;
  return p_r_dbm < m.n_th_dbm ? Observation::active_below : Observation::active_above;
}

inline Observation sense(bool pu_active, double p_r_dbm, const SensingModel& m, Rng& rng) {
  return sense_outcome(pu_active, p_r_dbm, m, rng.uniform());
}

inline double energy_cost(Action a, double h, const EnergyCosts& c) {
  const DecisionTuple t = tuple_of(a);
  return (t.sense ? c.alpha : 0.0) + (t.update ? c.update_cost(h) : 0.0) +
         (t.report_location ? c.delta : 0.0);
}

// Absorbs rounding in sums of costs that equal the level exactly.
inline constexpr double kEnergyTolerance = 1e-12;

inline bool check_causality(const Battery& b, Action a, double h, const EnergyCosts& c) {
  return energy_cost(a, h, c) <= b.level + kEnergyTolerance;
}

/// Spend against the current level, then credit the slot's harvest and clip.
inline Battery update_battery(const Battery& b, double e, Action a, double h, const EnergyCosts& c) {
  const double remaining = b.level - energy_cost(a, h, c);
  if (remaining < -kEnergyTolerance) throw Error("causality_violated", "causality violated");
  return Battery{std::min(std::max(remaining, 0.0) + e, b.capacity), b.capacity};
}

inline int update_aoi(int aoi, Action a, bool ack, int a_max) {
  if ((a == Action::overlay || a == Action::underlay) && ack) return 1;
  return std::min(aoi + 1, a_max);
}

/// Radius around the PU inside which the central entity refuses a grant:
/// where the PU's mean received power falls to the noise floor.
inline double protection_radius(const Geometry& g, const SensingModel& m) {
  return g.d0 * std::pow(10.0, (g.p_pu_dbm + g.k_db() - m.n0_dbm) / (10.0 * g.omega));
}

/// Power granted for an underlay update, nullopt for the zero grant.
using PowerGrant = std::optional<double>;

/// Largest SU power whose mean-path-loss interference at the PU stays at or
/// below the noise floor, capped at the SU's full power. Zero inside the
/// protection radius (the boundary itself included).
inline PowerGrant allocate_power(const Geometry& g, const SensingModel& m) {
  const double d = g.distance();
  if (!(d > 0.0)) throw Error("degenerate_geometry", "degenerate geometry");
  if (d - protection_radius(g, m) <= 0.0) return std::nullopt;
  const double limited = m.n0_dbm - g.k_db() + 10.0 * g.omega * std::log10(d / g.d0);
  return std::min(limited, g.p_full_dbm);
}

/// Mean interference the SU would cause at the PU when transmitting at p_tx.
inline double interference_at_pu(const Geometry& g, double p_tx_dbm) {
  return p_tx_dbm + g.k_db() - 10.0 * g.omega * std::log10(g.distance() / g.d0);
}

inline double rate_from_snr(double snr) { return std::log2(1.0 + snr); }

/// Shannon rate in bps/Hz; zero for the zero grant.
inline double rate(PowerGrant p_tx_dbm, double h, double noise_dbm) {
  if (!p_tx_dbm) return 0.0;
  const double snr = std::pow(10.0, (*p_tx_dbm - noise_dbm) / 10.0) * h * h;
  return rate_from_snr(snr);
}

inline bool is_transmission(int case_id) noexcept {
  return case_id == 2 || case_id == 3 || case_id == 6;
}
inline bool is_success(int case_id) noexcept { return case_id == 2 || case_id == 6; }

/// r = xi * rate - a_t for transmitting slots, -a_t otherwise.
inline double reward(const EnvState& s, int case_id, double rate_bps, double xi) {
  if (is_transmission(case_id)) return xi * rate_bps - static_cast<double>(s.aoi);
  return -static_cast<double>(s.aoi);
}

/// Actions whose full energy demand is covered by the current battery.
inline ActionMask valid_actions(const EnvState& s, double h, const EnergyCosts& c) {
  ActionMask mask = ActionMask::only(Action::no_sense);
  const Battery b{s.battery, std::numeric_limits<double>::infinity()};
  for (Action a : kAllActions)
    if (check_causality(b, a, h, c)) mask.insert(a);
  return mask;
}

}  // namespace aoi::env
