#pragma once

// Fully connected Q-network with ReLU hidden layers and either a plain
// linear head or a dueling (value + mean-centred advantage) head. Parameters
// live in one flat buffer so optimizers, target syncs and checkpoints work on
// a single contiguous array.

#include <aoi/error.hpp>
#include <aoi/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace aoi::nn {

enum class HeadKind : std::uint8_t { plain = 0, dueling = 1 };

struct Topology {
  std::size_t inputs = 4;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t outputs = 5;
  HeadKind head = HeadKind::plain;

  friend bool operator==(const Topology&, const Topology&) = default;
};

/// q_i = v + adv_i - mean(adv).
inline std::vector<double> dueling_combine(double v, std::span<const double> adv) {
  if (adv.empty()) return {};
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
  std::vector<double> q(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) q[i] = v + adv[i] - mean;
  return q;
}

/// Activations kept by forward_batch for the backward pass.
struct ForwardCache {
  std::size_t batch = 0;
  std::vector<std::vector<double>> trunk;  // [0] = input, then each hidden layer (post-ReLU)
  std::vector<double> value;               // dueling only, batch x 1
  std::vector<double> advantage;           // dueling only, batch x outputs
  std::vector<double> q;                   // batch x outputs
};

class DenseNet {
 public:
  /// Weights are stored input-major: w[k * out + j] connects input k to unit j.
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t w_offset = 0;
    std::size_t b_offset = 0;
  };

  DenseNet() = default;

  /// All parameters zero.
  explicit DenseNet(Topology topo) : topo_(std::move(topo)) {
    if (topo_.inputs == 0 || topo_.outputs == 0 || topo_.hidden.empty())
      throw Error("invalid_topology", "network needs inputs, outputs and at least one hidden layer");
    std::size_t offset = 0;
    auto add = [&](std::size_t in, std::size_t out) {
      if (in == 0 || out == 0) throw Error("invalid_topology", "layer widths must be positive");
      layers_.push_back({in, out, offset, offset + in * out});
      offset += in * out + out;
    };
    std::size_t width = topo_.inputs;
    for (std::size_t h : topo_.hidden) {
      add(width, h);
      width = h;
    }
    if (topo_.head == HeadKind::plain) {
      add(width, topo_.outputs);
    } else {
      add(width, 1);
      add(width, topo_.outputs);
    }
    params_.assign(offset, 0.0);
  }

  /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  static DenseNet he_uniform(Topology topo, Rng& rng) {
    DenseNet net(std::move(topo));
    for (const Layer& l : net.layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(l.in));
      for (std::size_t i = 0; i < l.in * l.out; ++i)
        net.params_[l.w_offset + i] = (2.0 * rng.uniform() - 1.0) * limit;
    }
    return net;
  }

  const Topology& topology() const noexcept { return topo_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t param_count() const noexcept { return params_.size(); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::size_t inputs() const noexcept { return topo_.inputs; }
  std::size_t outputs() const noexcept { return topo_.outputs; }

  /// Copies parameters from a network of identical topology.
  void copy_weights_from(const DenseNet& other) {
    if (!(other.topo_ == topo_)) throw Error("dimension_mismatch", "topology mismatch in weight copy");
    params_ = other.params_;
  }

  std::vector<double> forward(std::span<const double> x) const {
    ForwardCache cache;
    forward_batch(x, 1, cache);
    return cache.q;
  }

  /// x holds `batch` rows of `inputs()` values. Results land in cache.q.
  void forward_batch(std::span<const double> x, std::size_t batch, ForwardCache& cache) const {
    if (x.size() != batch * topo_.inputs) throw Error("dimension_mismatch", "input dimension mismatch");
    const std::size_t depth = topo_.hidden.size();
    cache.batch = batch;
    cache.trunk.resize(depth + 1);
    cache.trunk[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < depth; ++l) {
      affine(layers_[l], cache.trunk[l], batch, cache.trunk[l + 1]);
      for (double& a : cache.trunk[l + 1]) a = a > 0.0 ? a : 0.0;
    }
    const std::vector<double>& top = cache.trunk[depth];
    if (topo_.head == HeadKind::plain) {
      affine(layers_[depth], top, batch, cache.q);
      return;
    }
    affine(layers_[depth], top, batch, cache.value);
    affine(layers_[depth + 1], top, batch, cache.advantage);
    const std::size_t n = topo_.outputs;
    cache.q.resize(batch * n);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* adv = cache.advantage.data() + i * n;
      double mean = 0.0;
      for (std::size_t j = 0; j < n; ++j) mean += adv[j];
      mean /= static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) cache.q[i * n + j] = cache.value[i] + adv[j] - mean;
    }
  }

  /// Reverse-mode gradient of sum(q * grad_q) over the cached batch.
  /// Writes (not accumulates) into grads, sized param_count().
  void backward(const ForwardCache& cache, std::span<const double> grad_q, std::span<double> grads) const {
    const std::size_t batch = cache.batch;
    const std::size_t n = topo_.outputs;
    const std::size_t depth = topo_.hidden.size();
    if (grad_q.size() != batch * n) throw Error("dimension_mismatch", "output gradient dimension mismatch");
    if (grads.size() != params_.size()) throw Error("dimension_mismatch", "gradient buffer size mismatch");
    std::fill(grads.begin(), grads.end(), 0.0);

    const std::vector<double>& top = cache.trunk[depth];
    std::vector<double> delta(batch * topo_.hidden.back(), 0.0);
    if (topo_.head == HeadKind::plain) {
      affine_backward(layers_[depth], top, grad_q, batch, grads, delta);
    } else {
      std::vector<double> d_value(batch), d_adv(batch * n);
      for (std::size_t i = 0; i < batch; ++i) {
        const double* g = grad_q.data() + i * n;
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += g[j];
        d_value[i] = sum;
        const double mean = sum / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) d_adv[i * n + j] = g[j] - mean;
      }
      affine_backward(layers_[depth], top, d_value, batch, grads, delta);
      affine_backward(layers_[depth + 1], top, d_adv, batch, grads, delta);
    }

    std::vector<double> below;
    for (std::size_t l = depth; l-- > 0;) {
      const std::vector<double>& act = cache.trunk[l + 1];
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (!(act[i] > 0.0)) delta[i] = 0.0;
      below.assign(batch * layers_[l].in, 0.0);
      affine_backward(layers_[l], cache.trunk[l], delta, batch, grads, below, l > 0);
      delta.swap(below);
    }
  }

 private:
  void affine(const Layer& l, const std::vector<double>& x, std::size_t batch,
              std::vector<double>& y) const {
    y.resize(batch * l.out);
    const double* __restrict w = params_.data() + l.w_offset;
    const double* __restrict b = params_.data() + l.b_offset;
    for (std::size_t i = 0; i < batch; ++i) {
      double* __restrict yi = y.data() + i * l.out;
      const double* __restrict xi = x.data() + i * l.in;
      std::copy(b, b + l.out, yi);
      for (std::size_t k = 0; k < l.in; ++k) {
        const double xk = xi[k];
        if (xk == 0.0) continue;  // dead ReLU inputs
        const double* __restrict wk = w + k * l.out;
#pragma omp simd
        for (std::size_t j = 0; j < l.out; ++j) yi[j] += xk * wk[j];
      }
    }
  }

  // Accumulates dW, db into grads and (optionally) adds dX into dx.
  void affine_backward(const Layer& l, const std::vector<double>& x, std::span<const double> dy,
                       std::size_t batch, std::span<double> grads, std::vector<double>& dx,
                       bool want_dx = true) const {
    const double* __restrict w = params_.data() + l.w_offset;
    double* __restrict gw = grads.data() + l.w_offset;
    double* __restrict gb = grads.data() + l.b_offset;
    for (std::size_t i = 0; i < batch; ++i) {
      const double* __restrict dyi = dy.data() + i * l.out;
      const double* __restrict xi = x.data() + i * l.in;
#pragma omp simd
      for (std::size_t j = 0; j < l.out; ++j) gb[j] += dyi[j];
      for (std::size_t k = 0; k < l.in; ++k) {
        const double xk = xi[k];
        if (xk == 0.0) continue;
        double* __restrict gwk = gw + k * l.out;
#pragma omp simd
        for (std::size_t j = 0; j < l.out; ++j) gwk[j] += xk * dyi[j];
      }
      if (!want_dx) continue;
      double* __restrict dxi = dx.data() + i * l.in;
      for (std::size_t k = 0; k < l.in; ++k) {
        const double* __restrict wk = w + k * l.out;
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (std::size_t j = 0; j < l.out; ++j) acc += wk[j] * dyi[j];
        dxi[k] += acc;
      }
    }
  }

  Topology topo_{};
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

}  // namespace aoi::nn
