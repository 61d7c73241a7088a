#pragma once

#include <aoi/error.hpp>
#include <aoi/rng.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace aoi::agents {

struct Transition {
  std::vector<double> s;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

/// Fixed-capacity FIFO memory; pushing into a full buffer evicts the oldest.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 2000) : capacity_(capacity) {
    if (capacity_ == 0) throw Error("invalid_config", "replay capacity must be positive");
    items_.reserve(capacity_);
  }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
      return;
    }
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool full() const noexcept { return items_.size() == capacity_; }

  /// i-th element in insertion order, 0 = oldest retained.
  const Transition& at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  /// Indices (in insertion order) of `count` uniform draws with replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    if (items_.size() < count || items_.empty()) throw Error("warmup_incomplete", "warmup incomplete");
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(items_.size()));
    return idx;
  }

  std::vector<const Transition*> sample(std::size_t count, Rng& rng) const {
    std::vector<const Transition*> batch;
    batch.reserve(count);
    for (std::size_t i : sample_indices(count, rng)) batch.push_back(&at(i));
    return batch;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // oldest element once full
};

/// eps_t = max(floor, start * decay^t).
struct EpsilonSchedule {
  double start = 1.0;
  double decay = 0.99986;
  double floor = 0.001;

  double value(std::uint64_t step) const {
    return std::max(floor, start * std::pow(decay, static_cast<double>(step)));
  }

  /// First step whose value is the floor.
  std::uint64_t first_floor_step() const {
    if (start <= floor) return 0;
    std::uint64_t t = static_cast<std::uint64_t>(std::floor(std::log(floor / start) / std::log(decay)));
    while (t > 0 && start * std::pow(decay, static_cast<double>(t - 1)) <= floor) --t;
    while (start * std::pow(decay, static_cast<double>(t)) > floor) ++t;
    return t;
  }
};

}  // namespace aoi::agents
