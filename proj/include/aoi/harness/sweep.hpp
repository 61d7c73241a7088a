#pragma once

#include <aoi/agents/episode.hpp>
#include <aoi/harness/config.hpp>
#include <aoi/harness/stats.hpp>

#include <array>
#include <atomic>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace aoi::harness {

/// Stream labels under a run seed.
inline constexpr std::uint64_t kTrainWorld = 1;
inline constexpr std::uint64_t kEvalWorld = 2;
inline constexpr std::uint64_t kAgentStream = 3;

struct EvalSummary {
  double aoi = 0.0;     // mean slot AoI over all evaluation slots
  double rate = 0.0;    // mean slot rate, bps/Hz
  double access = 0.0;  // fraction of slots with a successful update
  double reward = 0.0;  // mean episode return
  std::array<std::uint64_t, 9> cases{};  // index 1..8
};

struct RunResult {
  Scheme scheme = Scheme::baseline;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> train_rewards;  // per training episode
  double final_reward = 0.0;          // trailing-window mean of train_rewards
  EvalSummary eval;
  std::optional<nn::DenseNet> net;  // learners, when requested
};

inline EvalSummary summarize_episodes(const std::vector<agents::EpisodeRecord>& eps) {
  EvalSummary s;
  std::size_t slots = 0, hits = 0;
  for (const auto& ep : eps) {
    for (const auto& r : ep.slots) {
      s.aoi += r.aoi;
      s.rate += r.rate;
      ++s.cases[static_cast<std::size_t>(r.case_id)];
      hits += env::is_success(r.case_id);
    }
    slots += ep.slots.size();
    s.reward += ep.total_reward();
  }
  if (slots == 0) throw Error("empty_records", "no evaluation slots");
  s.aoi /= static_cast<double>(slots);
  s.rate /= static_cast<double>(slots);
  s.access = static_cast<double>(hits) / static_cast<double>(slots);
  s.reward /= static_cast<double>(eps.size());
  return s;
}

/// Trailing mean over the last `window` entries up to and including i.
inline std::vector<double> smooth(const std::vector<double>& xs, std::size_t window) {
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= window) acc -= xs[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

/// Trains (learners) or replays (baseline) for agent.episodes episodes on the
/// training stream, then evaluates greedily on the held-out stream.
inline RunResult run_single(const ExperimentConfig& cfg, Scheme scheme, double value, std::uint64_t seed,
                            bool keep_net = false) {
  const env::EnvConfig ecfg = cfg.env_at(value);
  const std::size_t horizon = cfg.agent.horizon;
  RunResult r{scheme, value, seed, {}, 0.0, {}, std::nullopt};
  env::Environment train_env(ecfg, derive_key(seed, kTrainWorld));
  env::Environment eval_env(ecfg, derive_key(seed, kEvalWorld));
  std::vector<agents::EpisodeRecord> evals;
  evals.reserve(cfg.eval_episodes);

  if (scheme == Scheme::baseline) {
    for (std::size_t ep = 0; ep < cfg.agent.episodes; ++ep)
      r.train_rewards.push_back(agents::run_baseline_episode(train_env, ep, horizon).total_reward());
    for (std::size_t ep = 0; ep < cfg.eval_episodes; ++ep)
      evals.push_back(agents::run_baseline_episode(eval_env, ep, horizon));
  } else {
    agents::AgentConfig ac = cfg.agent;
    ac.learner = scheme == Scheme::dqn ? agents::Learner::dqn : agents::Learner::d3qn;
    agents::QAgent agent(ac, agents::kStateFeatures, derive_key(seed, kAgentStream));
    for (std::size_t ep = 0; ep < ac.episodes; ++ep)
      r.train_rewards.push_back(agents::run_episode(agent, train_env, ep, true, horizon).total_reward());
    for (std::size_t ep = 0; ep < cfg.eval_episodes; ++ep)
      evals.push_back(agents::run_episode(agent, eval_env, ep, false, horizon));
    if (keep_net) r.net = agent.online();
  }
  r.eval = summarize_episodes(evals);
  if (r.train_rewards.empty()) {
    r.final_reward = r.eval.reward;
  } else {
    const std::size_t w = std::min(cfg.smoothing, r.train_rewards.size());
    double acc = 0.0;
    for (std::size_t i = r.train_rewards.size() - w; i < r.train_rewards.size(); ++i) acc += r.train_rewards[i];
    r.final_reward = acc / static_cast<double>(w);
  }
  return r;
}

struct MetricsRow {
  Scheme scheme = Scheme::baseline;
  double value = 0.0;
  Summary aoi, rate, access, reward;
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<RunResult> runs;  // ordered by (value, scheme, seed)
  std::vector<MetricsRow> rows;

  const MetricsRow* row(Scheme s, double value) const {
    for (const auto& r : rows)
      if (r.scheme == s && (r.value == value || (std::isnan(r.value) && std::isnan(value)))) return &r;
    return nullptr;
  }
};

inline std::vector<MetricsRow> aggregate(const ExperimentConfig& cfg, const std::vector<RunResult>& runs) {
  std::vector<MetricsRow> rows;
  for (double v : cfg.points())
    for (Scheme s : cfg.schemes) {
      std::vector<double> aoi, rate, access, reward;
      for (const auto& r : runs) {
        const bool same = r.value == v || (std::isnan(r.value) && std::isnan(v));
        if (r.scheme != s || !same) continue;
        aoi.push_back(r.eval.aoi);
        rate.push_back(r.eval.rate);
        access.push_back(r.eval.access);
        reward.push_back(r.final_reward);
      }
      rows.push_back({s, v, summarize(aoi), summarize(rate), summarize(access), summarize(reward)});
    }
  return rows;
}

using ProgressFn = std::function<void(const RunResult&)>;

/// Runs every (value, scheme, seed) triple; `jobs` workers share the queue
/// and results land in fixed slots, so the output does not depend on jobs.
inline SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t jobs = 1, ProgressFn progress = {}) {
  cfg.validate();
  struct Task {
    Scheme scheme;
    double value;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (double v : cfg.points())
    for (Scheme s : cfg.schemes)
      for (std::uint64_t seed : cfg.seeds) tasks.push_back({s, v, seed});

  SweepResult out;
  out.config = cfg;
  out.runs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        out.runs[i] = run_single(cfg, tasks[i].scheme, tasks[i].value, tasks[i].seed);
      } catch (...) {
        std::lock_guard lock(log_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
        return;
      }
      if (progress) {
        std::lock_guard lock(log_mutex);
        progress(out.runs[i]);
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  out.rows = aggregate(cfg, out.runs);
  return out;
}

}  // namespace aoi::harness
