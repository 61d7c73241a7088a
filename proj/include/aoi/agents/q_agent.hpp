#pragma once

// DQN and D3QN learners: online network, lagged target network, replay
// memory, epsilon-greedy exploration and TD regression with Adam.

#include <aoi/agents/replay.hpp>
#include <aoi/env/model.hpp>
#include <aoi/nn/adam.hpp>
#include <aoi/nn/dense_net.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace aoi::agents {

enum class Learner : std::uint8_t { dqn, d3qn };

inline std::string learner_name(Learner l) { return l == Learner::dqn ? "dqn" : "d3qn"; }

struct AgentConfig {
  Learner learner = Learner::dqn;
  double gamma = 0.95;
  nn::AdamConfig adam{};
  std::size_t batch = 32;
  std::size_t target_sync = 35;
  std::size_t memory = 2000;
  std::size_t warmup = 2000;  // transitions stored before the first update
  EpsilonSchedule epsilon{};
  std::vector<std::size_t> hidden{64, 64};
  std::size_t episodes = 200;
  std::size_t horizon = 300;
  bool terminal_at_horizon = false;  // time-limit truncation bootstraps by default

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("invalid_config", "gamma must lie in [0,1)");
    if (!(adam.learning_rate > 0.0)) throw Error("invalid_config", "learning rate must be positive");
    if (batch == 0 || target_sync == 0 || memory == 0 || horizon == 0)
      throw Error("invalid_config", "batch, target_sync, memory and horizon must be positive");
    if (batch > memory) throw Error("invalid_config", "batch larger than replay memory");
    if (hidden.empty()) throw Error("invalid_config", "at least one hidden layer required");
  }
};

/// Masked argmax; ties go to the lowest index.
inline std::size_t masked_argmax(std::span<const double> q, env::ActionMask mask) {
  std::size_t best = env::kNumActions;
  for (std::size_t i = 0; i < q.size() && i < env::kNumActions; ++i) {
    if (!mask.contains(env::action_at(i))) continue;
    if (best == env::kNumActions || q[i] > q[best]) best = i;
  }
  if (best == env::kNumActions) throw Error("empty_mask", "action mask is empty");
  return best;
}

inline env::Action uniform_from_mask(env::ActionMask mask, Rng& rng) {
  const std::size_t n = mask.size();
  if (n == 0) throw Error("empty_mask", "action mask is empty");
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (env::Action a : env::kAllActions) {
    if (!mask.contains(a)) continue;
    if (pick-- == 0) return a;
  }
  return env::Action::no_sense;
}

/// Epsilon-greedy over the masked actions. The uniform draw that decides
/// exploration is always consumed.
inline env::Action select_action(const nn::DenseNet& net, std::span<const double> state,
                                 env::ActionMask mask, double epsilon, Rng& rng) {
  if (mask.empty()) throw Error("empty_mask", "action mask is empty");
  if (rng.uniform() < epsilon) return uniform_from_mask(mask, rng);
  const std::vector<double> q = net.forward(state);
  return env::action_at(masked_argmax(q, mask));
}

namespace detail {

inline void stack_states(const std::vector<const Transition*>& batch, bool next, std::vector<double>& out) {
  out.clear();
  for (const Transition* t : batch) {
    const auto& v = next ? t->s_next : t->s;
    out.insert(out.end(), v.begin(), v.end());
  }
}

}  // namespace detail

/// y_i = r_i + gamma * max_x Q(s'_i, x; target), bootstrap dropped when done.
inline std::vector<double> dqn_targets(const std::vector<const Transition*>& batch,
                                       const nn::DenseNet& /*online*/, const nn::DenseNet& target,
                                       double gamma) {
  std::vector<double> x;
  detail::stack_states(batch, true, x);
  nn::ForwardCache cache;
  target.forward_batch(x, batch.size(), cache);
  const std::size_t n = target.outputs();
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double* q = cache.q.data() + i * n;
    const double best = *std::max_element(q, q + n);
    y[i] = batch[i]->reward + (batch[i]->done ? 0.0 : gamma * best);
  }
  return y;
}

/// y_i = r_i + gamma * Q(s'_i, argmax_x Q(s'_i, x; online); target).
inline std::vector<double> double_targets(const std::vector<const Transition*>& batch,
                                          const nn::DenseNet& online, const nn::DenseNet& target,
                                          double gamma) {
  std::vector<double> x;
  detail::stack_states(batch, true, x);
  nn::ForwardCache sel, eval;
  online.forward_batch(x, batch.size(), sel);
  target.forward_batch(x, batch.size(), eval);
  const std::size_t n = target.outputs();
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double* qs = sel.q.data() + i * n;
    const std::size_t pick = static_cast<std::size_t>(std::max_element(qs, qs + n) - qs);
    y[i] = batch[i]->reward + (batch[i]->done ? 0.0 : gamma * eval.q[i * n + pick]);
  }
  return y;
}

class QAgent {
 public:
  QAgent(AgentConfig cfg, std::size_t inputs, std::uint64_t seed)
      : cfg_(std::move(cfg)), buffer_(cfg_.memory), rng_(derive_key(seed, 0xA6E7)) {
    cfg_.validate();
    nn::Topology topo{inputs, cfg_.hidden, env::kNumActions,
                      cfg_.learner == Learner::dqn ? nn::HeadKind::plain : nn::HeadKind::dueling};
    Rng init(derive_key(seed, 0x1417));
    online_ = nn::DenseNet::he_uniform(topo, init);
    target_ = online_;
    adam_ = nn::Adam(online_.param_count(), cfg_.adam);
    grads_.resize(online_.param_count());
  }

  const AgentConfig& config() const noexcept { return cfg_; }
  const nn::DenseNet& online() const noexcept { return online_; }
  const nn::DenseNet& target() const noexcept { return target_; }
  nn::DenseNet& online() noexcept { return online_; }
  const ReplayBuffer& buffer() const noexcept { return buffer_; }
  std::uint64_t steps() const noexcept { return steps_; }
  std::uint64_t updates() const noexcept { return updates_; }
  std::uint64_t syncs() const noexcept { return syncs_; }
  double epsilon() const { return cfg_.epsilon.value(steps_); }
  Rng& rng() noexcept { return rng_; }

  env::Action act(std::span<const double> state, env::ActionMask mask, double eps) {
    return select_action(online_, state, mask, eps, rng_);
  }

  env::Action greedy(std::span<const double> state, env::ActionMask mask) const {
    return env::action_at(masked_argmax(online_.forward(state), mask));
  }

  std::vector<double> targets(const std::vector<const Transition*>& batch) const {
    return cfg_.learner == Learner::dqn ? dqn_targets(batch, online_, target_, cfg_.gamma)
                                        : double_targets(batch, online_, target_, cfg_.gamma);
  }

  /// Mean squared TD error on the taken actions followed by one Adam step.
  /// Returns the loss before the step.
  double train_step(const std::vector<const Transition*>& batch) {
    const std::vector<double> y = targets(batch);
    detail::stack_states(batch, false, x_);
    online_.forward_batch(x_, batch.size(), cache_);
    const std::size_t n = online_.outputs();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    grad_q_.assign(batch.size() * n, 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t a = batch[i]->action;
      const double err = cache_.q[i * n + a] - y[i];
      loss += err * err;
      grad_q_[i * n + a] = 2.0 * err * inv_b;
    }
    online_.backward(cache_, grad_q_, grads_);
    adam_.step(online_.params(), grads_);
    ++updates_;
    return loss * inv_b;
  }

  void sync_target() {
    target_.copy_weights_from(online_);
    ++syncs_;
  }

  /// Stores a transition, trains once the warmup gate is passed and syncs
  /// the target every `target_sync` steps.
  void observe(Transition t) {
    buffer_.push(std::move(t));
    ++steps_;
    if (buffer_.size() >= std::max(cfg_.warmup, cfg_.batch) || buffer_.full()) {
      last_loss_ = train_step(buffer_.sample(cfg_.batch, rng_));
    }
    if (steps_ % cfg_.target_sync == 0) sync_target();
  }

  double last_loss() const noexcept { return last_loss_; }

 private:
  AgentConfig cfg_;
  nn::DenseNet online_;
  nn::DenseNet target_;
  nn::Adam adam_;
  ReplayBuffer buffer_;
  Rng rng_;
  std::uint64_t steps_ = 0;
  std::uint64_t updates_ = 0;
  std::uint64_t syncs_ = 0;
  double last_loss_ = 0.0;
  std::vector<double> grads_, grad_q_, x_;
  nn::ForwardCache cache_;
};

}  // namespace aoi::agents
