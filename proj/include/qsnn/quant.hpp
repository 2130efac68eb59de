#pragma once

#include <cmath>
#include <optional>

#include "qsnn/rng.hpp"
#include "qsnn/tensor.hpp"

namespace qsnn {

// Scalar kernels of the quantized activation. `y` is the (possibly noisy)
// ratio v/s + ε; `p` the integer ceiling.
namespace quant {

// Nearest integer, ties away from zero.
inline double round_nearest(double y) { return std::round(y); }

// round(clip(y, 0, p)): the integer state of the activation.
double state(double y, int p);

// ∂v̂/∂v of the straight-through estimator: 1 on the open interval (0, p).
double grad_v(double y, int p);

// ∂v̂/∂s (LSQ-style): 0 below, round(y) - y inside, p at and above p.
double grad_s(double y, int p);

}  // namespace quant

// Draws i.i.d. noise strictly inside (-0.5, 0.5).
Tensor sample_noise(Rng& rng, const Shape& shape);

// Lower bound applied to the scale after every optimizer step.
inline constexpr double kMinScale = 1e-4;

// Activation cache of the most recent forward pass.
struct QuantCache {
  Tensor x;    // v / s
  Tensor eps;  // sampled noise, zero on the deterministic path
  bool sampled = false;
};

// Quantized clipped-ReLU activation  v̂ = s·round(clip(v/s + ε, 0, p))  with a
// learnable scale s and an optional noise adaptor ε ~ U(-0.5, 0.5).
//
// With noise the activation output lands on one of the two integer states
// adjacent to v/s, with the upper one chosen with probability frac(v/s). Its
// mean over ε is therefore exactly clip(v, 0, s·p), which is what a spiking
// neuron converges to as the simulation length grows. The sampled ε is kept
// in the cache and reused by the matching backward call.
class QuantActLayer {
 public:
  QuantActLayer(int p, bool noise_enabled, std::optional<double> scale = std::nullopt);

  int p() const { return p_; }
  bool noise_enabled() const { return noise_enabled_; }
  void set_noise_enabled(bool on) { noise_enabled_ = on; }

  // The scale is unset until set_scale or init_scale_from is called.
  bool scale_initialized() const { return s_.has_value(); }
  double scale() const;
  double& scale_ref();
  void set_scale(double s);
  // s₀ = 2·mean(|v|)/√p over the given pre-activations (LSQ initializer).
  void init_scale_from(const Tensor& v);

  double grad_s() const { return grad_s_; }
  double& grad_s_ref() { return grad_s_; }
  void zero_grad() { grad_s_ = 0.0; }

  // Deterministic path: s·round(clip(v/s, 0, p)). Caches ε = 0.
  Tensor quant_forward(const Tensor& v);
  Tensor quant_backward(const Tensor& grad_out);

  // Noisy path. Samples ε when the adaptor is enabled; with it disabled ε = 0
  // and the result equals quant_forward.
  Tensor na_forward(const Tensor& v, Rng& rng);
  // Same with caller-supplied ε (entries must lie in (-0.5, 0.5)).
  Tensor na_forward(const Tensor& v, const Tensor& eps);
  Tensor na_backward(const Tensor& grad_out);

  // Analytic mean of na_forward over ε: clip(v, 0, s·p).
  Tensor expected_activation(const Tensor& v) const;

  // Differentiable surrogate that uses expected_activation as its forward
  // pass; used to audit the chain rule of whole networks by finite
  // differences. ∂/∂v = 1 on (0, s·p), ∂/∂s = p for v ≥ s·p.
  Tensor expected_forward(const Tensor& v);
  Tensor expected_backward(const Tensor& grad_out);

  const std::optional<QuantCache>& cache() const { return cache_; }

 private:
  double checked_scale() const;
  Tensor forward_with(const Tensor& v, Tensor eps);
  Tensor backward_cached(const Tensor& grad_out, const char* who);

  int p_;
  bool noise_enabled_;
  std::optional<double> s_;
  double grad_s_ = 0.0;
  std::optional<QuantCache> cache_;
  std::optional<Tensor> surrogate_input_;
};

}  // namespace qsnn
