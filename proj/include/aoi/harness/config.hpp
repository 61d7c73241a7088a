#pragma once

#include <aoi/agents/q_agent.hpp>
#include <aoi/env/config_io.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace aoi::harness {

using nlohmann::json;

enum class Scheme : std::uint8_t { baseline, dqn, d3qn };

inline std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::baseline: return "baseline";
    case Scheme::dqn: return "dqn";
    case Scheme::d3qn: return "d3qn";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "baseline") return Scheme::baseline;
  if (s == "dqn") return Scheme::dqn;
  if (s == "d3qn") return Scheme::d3qn;
  throw Error("invalid_config", "unknown scheme '" + s + "'");
}

enum class SweepAxis : std::uint8_t { none, p_pu_dbm, b_max };

inline std::string axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::none: return "none";
    case SweepAxis::p_pu_dbm: return "p_pu_dbm";
    case SweepAxis::b_max: return "b_max";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "none") return SweepAxis::none;
  if (s == "p_pu_dbm" || s == "p_pu") return SweepAxis::p_pu_dbm;
  if (s == "b_max") return SweepAxis::b_max;
  throw Error("invalid_sweep_axis", "invalid sweep axis '" + s + "'");
}

struct ExperimentConfig {
  env::EnvConfig env{};
  agents::AgentConfig agent{};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  SweepAxis axis = SweepAxis::none;
  std::vector<double> values{};  // empty with axis none
  std::vector<Scheme> schemes{Scheme::baseline, Scheme::dqn, Scheme::d3qn};
  std::size_t eval_episodes = 50;
  std::size_t smoothing = 20;  // trailing window of the reward curves

  /// Sweep points; a single point (the configured value) without an axis.
  std::vector<double> points() const {
    if (axis == SweepAxis::none) return {std::nan("")};
    return values;
  }

  /// Environment at one sweep point. The initial battery keeps its fill ratio.
  env::EnvConfig env_at(double value) const {
    env::EnvConfig e = env;
    if (axis == SweepAxis::p_pu_dbm) e.geometry.p_pu_dbm = value;
    if (axis == SweepAxis::b_max) {
      e.b0 = env.b0 / env.b_max * value;
      e.b_max = value;
    }
    e.validate();
    return e;
  }

  void validate() const {
    env.validate();
    agent.validate();
    if (seeds.empty()) throw Error("invalid_config", "at least one seed required");
    if (schemes.empty()) throw Error("invalid_config", "at least one scheme required");
    if (eval_episodes == 0) throw Error("invalid_config", "eval_episodes must be positive");
    if (smoothing == 0) throw Error("invalid_config", "smoothing window must be positive");
    if (axis != SweepAxis::none) {
      if (values.empty()) throw Error("invalid_config", "sweep needs at least one value");
      for (double v : values)
        if (!std::isfinite(v)) throw Error("invalid_config", "sweep values must be finite");
      if (!std::is_sorted(values.begin(), values.end()))
        throw Error("invalid_config", "sweep values must be sorted");
      for (double v : values) (void)env_at(v);
    }
  }
};

namespace detail {

inline void read_agent(const json& j, agents::AgentConfig& a) {
  using env::detail::read;
  env::detail::reject_unknown(j, "agent",
                              {"gamma", "learning_rate", "adam_beta1", "adam_beta2", "adam_epsilon",
                               "batch", "target_sync", "memory", "warmup", "eps_start", "eps_decay",
                               "eps_floor", "hidden", "episodes", "horizon", "terminal_at_horizon"});
  read(j, "gamma", a.gamma);
  read(j, "learning_rate", a.adam.learning_rate);
  read(j, "adam_beta1", a.adam.beta1);
  read(j, "adam_beta2", a.adam.beta2);
  read(j, "adam_epsilon", a.adam.epsilon);
  read(j, "batch", a.batch);
  read(j, "target_sync", a.target_sync);
  read(j, "memory", a.memory);
  read(j, "warmup", a.warmup);
  read(j, "eps_start", a.epsilon.start);
  read(j, "eps_decay", a.epsilon.decay);
  read(j, "eps_floor", a.epsilon.floor);
  read(j, "hidden", a.hidden);
  read(j, "episodes", a.episodes);
  read(j, "horizon", a.horizon);
  read(j, "terminal_at_horizon", a.terminal_at_horizon);
}

inline json agent_to_json(const agents::AgentConfig& a) {
  return {{"gamma", a.gamma},
          {"learning_rate", a.adam.learning_rate},
          {"adam_beta1", a.adam.beta1},
          {"adam_beta2", a.adam.beta2},
          {"adam_epsilon", a.adam.epsilon},
          {"batch", a.batch},
          {"target_sync", a.target_sync},
          {"memory", a.memory},
          {"warmup", a.warmup},
          {"eps_start", a.epsilon.start},
          {"eps_decay", a.epsilon.decay},
          {"eps_floor", a.epsilon.floor},
          {"hidden", a.hidden},
          {"episodes", a.episodes},
          {"horizon", a.horizon},
          {"terminal_at_horizon", a.terminal_at_horizon}};
}

}  // namespace detail

/// Top-level sections: env, agent, experiment. Absent keys keep `base`.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig cfg = {}) {
  using env::detail::read;
  if (!j.is_object()) throw Error("invalid_config", "config must be a JSON object");
  env::detail::reject_unknown(j, "config", {"env", "agent", "experiment"});
  if (auto it = j.find("env"); it != j.end()) cfg.env = env::env_config_from_json(*it, cfg.env);
  if (auto it = j.find("agent"); it != j.end()) detail::read_agent(*it, cfg.agent);
  if (auto it = j.find("experiment"); it != j.end()) {
    const json& e = *it;
    env::detail::reject_unknown(e, "experiment",
                                {"seeds", "axis", "values", "schemes", "eval_episodes", "smoothing"});
    read(e, "seeds", cfg.seeds);
    if (auto a = e.find("axis"); a != e.end()) cfg.axis = parse_axis(a->get<std::string>());
    read(e, "values", cfg.values);
    if (auto s = e.find("schemes"); s != e.end()) {
      cfg.schemes.clear();
      for (const auto& name : *s) cfg.schemes.push_back(parse_scheme(name.get<std::string>()));
    }
    read(e, "eval_episodes", cfg.eval_episodes);
    read(e, "smoothing", cfg.smoothing);
  }
  cfg.validate();
  return cfg;
}

inline json config_to_json(const ExperimentConfig& c) {
  json schemes = json::array();
  for (Scheme s : c.schemes) schemes.push_back(scheme_name(s));
  return {{"env", env::env_config_to_json(c.env)},
          {"agent", detail::agent_to_json(c.agent)},
          {"experiment",
           {{"seeds", c.seeds},
            {"axis", axis_name(c.axis)},
            {"values", c.values},
            {"schemes", schemes},
            {"eval_episodes", c.eval_episodes},
            {"smoothing", c.smoothing}}}};
}

inline json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("io_error", "cannot open config '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error("invalid_config", "config '" + path + "' is not valid JSON");
  }
}

/// Applies "section.key=value" (any depth) to a config document. The value
/// is parsed as JSON when possible and kept as a string otherwise.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("invalid_override", "override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw Error("invalid_override", "empty component in '" + path + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw Error("invalid_override", "'" + path + "' does not name a config key");
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() && !node->is_null())
    throw Error("invalid_override", "'" + path + "' does not name a config key");
  (*node)[parts.back()] = value;
}

/// 64-bit FNV-1a of the canonical JSON text.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

}  // namespace aoi::harness
