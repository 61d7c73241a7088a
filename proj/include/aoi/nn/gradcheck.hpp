#pragma once

#include <aoi/nn/dense_net.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace aoi::nn {

// Central differences at h = 1e-5 in 64-bit resolve gradients to roughly
// 2e-10 absolute, so ratios are taken against at least this scale.
inline constexpr double kGradFloor = 1e-3;

struct GradCheckResult {
  double max_rel_error = 0.0;  // |a - n| / max(|a|, |n|, floor)
  double max_raw_ratio = 0.0;  // |a - n| / max(|a|, |n|), unfloored
  double max_abs_error = 0.0;
  std::size_t worst_param = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t kinks = 0;  // parameters whose probes flipped a ReLU; not compared
};

inline double relative_error(double a, double n, double floor = kGradFloor) {
  const double denom = std::max({std::abs(a), std::abs(n), floor});
  return denom > 0.0 ? std::abs(a - n) / denom : 0.0;
}

/// Hidden units whose pre-activation is within `margin` of zero for the batch.
inline std::size_t near_kinks(const DenseNet& net, std::span<const double> inputs, double margin) {
  const std::size_t batch = inputs.size() / net.inputs();
  ForwardCache cache;
  net.forward_batch(inputs, batch, cache);
  // Recompute pre-activations layer by layer from the cached inputs.
  std::size_t count = 0;
  const auto p = net.params();
  for (std::size_t l = 0; l < net.topology().hidden.size(); ++l) {
    const auto& layer = net.layers()[l];
    const auto& x = cache.trunk[l];
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < layer.out; ++j) {
        double z = p[layer.b_offset + j];
        for (std::size_t k = 0; k < layer.in; ++k) z += x[i * layer.in + k] * p[layer.w_offset + k * layer.out + j];
        count += std::abs(z) < margin;
      }
  }
  return count;
}

/// Uniform [-1, 1) inputs redrawn until no hidden pre-activation lies within
/// `margin` of zero, so probes of size h cannot cross a ReLU kink.
inline std::vector<double> draw_smooth_inputs(const DenseNet& net, std::size_t batch, Rng& rng,
                                              double margin = 1e-3) {
  std::vector<double> x(batch * net.inputs());
  do {
    for (double& v : x) v = 2.0 * rng.uniform() - 1.0;
  } while (near_kinks(net, x, margin) > 0);
  return x;
}

/// Compares backward() against central differences of f = sum(q * grad_out)
/// for every parameter.
inline GradCheckResult gradient_check(const DenseNet& net, std::span<const double> inputs,
                                      std::span<const double> grad_out, double h = 1e-5,
                                      double floor = kGradFloor) {
  const std::size_t batch = inputs.size() / net.inputs();
  ForwardCache base;
  net.forward_batch(inputs, batch, base);
  std::vector<double> analytic(net.param_count());
  net.backward(base, grad_out, analytic);

  auto same_pattern = [&](const ForwardCache& c) {
    for (std::size_t l = 1; l < c.trunk.size(); ++l)
      for (std::size_t i = 0; i < c.trunk[l].size(); ++i)
        if ((c.trunk[l][i] > 0.0) != (base.trunk[l][i] > 0.0)) return false;
    return true;
  };
  ForwardCache c;
  auto objective = [&](const DenseNet& n, bool& smooth) {
    n.forward_batch(inputs, batch, c);
    smooth = smooth && same_pattern(c);
    double f = 0.0;
    for (std::size_t i = 0; i < c.q.size(); ++i) f += c.q[i] * grad_out[i];
    return f;
  };

  DenseNet probe = net;
  GradCheckResult result;
  for (std::size_t p = 0; p < net.param_count(); ++p) {
    const double saved = probe.params()[p];
    bool smooth = true;
    probe.params()[p] = saved + h;
    const double up = objective(probe, smooth);
    probe.params()[p] = saved - h;
    const double down = objective(probe, smooth);
    probe.params()[p] = saved;
    if (!smooth) {
      ++result.kinks;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[p];
    const double abs_err = std::abs(a - numeric);
    result.max_abs_error = std::max(result.max_abs_error, abs_err);
    result.max_raw_ratio = std::max(result.max_raw_ratio, relative_error(a, numeric, 0.0));
    const double err = relative_error(a, numeric, floor);
    if (err >= result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_param = p;
      result.analytic = a;
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace aoi::nn
