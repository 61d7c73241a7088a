#pragma once

#include <aoi/env/environment.hpp>

#include <json.hpp>

#include <initializer_list>
#include <string>

namespace aoi::env {

namespace detail {

inline void reject_unknown(const nlohmann::json& section, const std::string& name,
                           std::initializer_list<const char*> known) {
  if (!section.is_object()) throw Error("invalid_config", "section '" + name + "' must be an object");
  for (auto it = section.begin(); it != section.end(); ++it) {
    bool found = false;
    for (const char* k : known) found = found || it.key() == k;
    if (!found) throw Error("invalid_config", "unknown key '" + name + "." + it.key() + "'");
  }
}

template <typename T>
void read(const nlohmann::json& section, const char* key, T& out) {
  if (auto it = section.find(key); it != section.end()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error("invalid_config", std::string("bad value for '") + key + "'");
    }
  }
}

}  // namespace detail

inline HarvestMode parse_harvest_mode(const std::string& s) {
  if (s == "poisson") return HarvestMode::poisson;
  if (s == "normal" || s == "truncated_normal") return HarvestMode::truncated_normal;
  throw Error("invalid_config", "unknown harvest mode '" + s + "'");
}

inline std::string harvest_mode_name(HarvestMode m) {
  return m == HarvestMode::poisson ? "poisson" : "normal";
}

/// Reads sections pu, sensing, energy, geometry, costs, reward on top of
/// `base`. Absent keys keep their value; unknown keys are rejected.
inline EnvConfig env_config_from_json(const nlohmann::json& j, EnvConfig cfg = {}) {
  using detail::read;
  using detail::reject_unknown;
  if (!j.is_object()) throw Error("invalid_config", "environment config must be an object");
  reject_unknown(j, "env", {"pu", "sensing", "energy", "geometry", "costs", "reward"});

  if (auto it = j.find("pu"); it != j.end()) {
    reject_unknown(*it, "pu", {"p_ia", "p_ai"});
    read(*it, "p_ia", cfg.pu.p_ia);
    read(*it, "p_ai", cfg.pu.p_ai);
  }
  if (auto it = j.find("sensing"); it != j.end()) {
    reject_unknown(*it, "sensing", {"p_f", "p_d", "n0_dbm", "n_th_dbm"});
    read(*it, "p_f", cfg.sensing.p_f);
    read(*it, "p_d", cfg.sensing.p_d);
    read(*it, "n0_dbm", cfg.sensing.n0_dbm);
    read(*it, "n_th_dbm", cfg.sensing.n_th_dbm);
  }
  if (auto it = j.find("energy"); it != j.end()) {
    reject_unknown(*it, "energy", {"mode", "mean", "std", "b_max", "b0"});
    std::string mode = harvest_mode_name(cfg.harvester.mode);
    read(*it, "mode", mode);
    cfg.harvester.mode = parse_harvest_mode(mode);
    read(*it, "mean", cfg.harvester.mean);
    read(*it, "std", cfg.harvester.std);
    const bool b0_given = it->contains("b0");
    read(*it, "b_max", cfg.b_max);
    read(*it, "b0", cfg.b0);
    if (!b0_given) cfg.b0 = std::min(cfg.b0, cfg.b_max);
  }
  if (auto it = j.find("geometry"); it != j.end()) {
    reject_unknown(*it, "geometry", {"d0", "omega", "shadow_var_db", "freq_hz", "p_pu_dbm",
                                     "p_full_dbm", "r_min", "r_max", "rayleigh_scale"});
    read(*it, "d0", cfg.geometry.d0);
    read(*it, "omega", cfg.geometry.omega);
    read(*it, "shadow_var_db", cfg.geometry.shadow_var_db);
    read(*it, "freq_hz", cfg.geometry.freq_hz);
    read(*it, "p_pu_dbm", cfg.geometry.p_pu_dbm);
    read(*it, "p_full_dbm", cfg.geometry.p_full_dbm);
    read(*it, "r_min", cfg.r_min);
    read(*it, "r_max", cfg.r_max);
    read(*it, "rayleigh_scale", cfg.rayleigh_scale);
  }
  if (auto it = j.find("costs"); it != j.end()) {
    reject_unknown(*it, "costs", {"alpha", "delta"});
    read(*it, "alpha", cfg.costs.alpha);
    read(*it, "delta", cfg.costs.delta);
  }
  if (auto it = j.find("reward"); it != j.end()) {
    reject_unknown(*it, "reward", {"xi", "a_max"});
    read(*it, "xi", cfg.xi);
    read(*it, "a_max", cfg.a_max);
  }
  cfg.validate();
  return cfg;
}

inline nlohmann::json env_config_to_json(const EnvConfig& c) {
  return {
      {"pu", {{"p_ia", c.pu.p_ia}, {"p_ai", c.pu.p_ai}}},
      {"sensing",
       {{"p_f", c.sensing.p_f}, {"p_d", c.sensing.p_d}, {"n0_dbm", c.sensing.n0_dbm},
        {"n_th_dbm", c.sensing.n_th_dbm}}},
      {"energy",
       {{"mode", harvest_mode_name(c.harvester.mode)}, {"mean", c.harvester.mean},
        {"std", c.harvester.std}, {"b_max", c.b_max}, {"b0", c.b0}}},
      {"geometry",
       {{"d0", c.geometry.d0}, {"omega", c.geometry.omega},
        {"shadow_var_db", c.geometry.shadow_var_db}, {"freq_hz", c.geometry.freq_hz},
        {"p_pu_dbm", c.geometry.p_pu_dbm}, {"p_full_dbm", c.geometry.p_full_dbm},
        {"r_min", c.r_min}, {"r_max", c.r_max}, {"rayleigh_scale", c.rayleigh_scale}}},
      {"costs", {{"alpha", c.costs.alpha}, {"delta", c.costs.delta}}},
      {"reward", {{"xi", c.xi}, {"a_max", c.a_max}}},
  };
}

}  // namespace aoi::env
