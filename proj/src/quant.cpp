#include "qsnn/quant.hpp"

#include <algorithm>
#include <cmath>

#include "qsnn/error.hpp"

namespace qsnn {

namespace quant {

double state(double y, int p) { return round_nearest(std::clamp(y, 0.0, static_cast<double>(p))); }

double grad_v(double y, int p) { return (y > 0.0 && y < p) ? 1.0 : 0.0; }

double grad_s(double y, int p) {
  if (y <= 0.0) return 0.0;
  if (y >= p) return static_cast<double>(p);
  return -y + round_nearest(y);
}

}  // namespace quant

Tensor sample_noise(Rng& rng, const Shape& shape) {
  Tensor eps(shape);
  for (double& e : eps.data()) e = rng.centered_noise();
  return eps;
}

QuantActLayer::QuantActLayer(int p, bool noise_enabled, std::optional<double> scale)
    : p_(p), noise_enabled_(noise_enabled) {
  if (p < 1) throw ConfigError("quantization ceiling p must be >= 1, got " + std::to_string(p));
  if (scale) set_scale(*scale);
}

double QuantActLayer::scale() const { return checked_scale(); }

double& QuantActLayer::scale_ref() {
  if (!s_) throw StateError("quant layer scale is not initialized");
  return *s_;
}

void QuantActLayer::set_scale(double s) {
  if (!(s > 0.0) || !std::isfinite(s))
    throw StateError("quant layer scale must be positive and finite, got " + std::to_string(s));
  s_ = s;
}

void QuantActLayer::init_scale_from(const Tensor& v) {
  double acc = 0.0;
  for (double x : v.data()) acc += std::abs(x);
  const double mean = v.size() ? acc / static_cast<double>(v.size()) : 0.0;
  if (!std::isfinite(mean)) throw DivergenceError("non-finite pre-activations while initializing the scale");
  set_scale(std::max(2.0 * mean / std::sqrt(static_cast<double>(p_)), kMinScale));
}

double QuantActLayer::checked_scale() const {
  if (!s_) throw StateError("quant layer scale is not initialized");
  if (!(*s_ > 0.0)) throw StateError("quant layer scale must be positive, got " + std::to_string(*s_));
  return *s_;
}

Tensor QuantActLayer::forward_with(const Tensor& v, Tensor eps) {
  const double s = checked_scale();
  Tensor x(v.shape()), out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    x[i] = v[i] / s;
    out[i] = s * quant::state(x[i] + eps[i], p_);
  }
  cache_ = QuantCache{std::move(x), std::move(eps), false};
  return out;
}

Tensor QuantActLayer::quant_forward(const Tensor& v) { return forward_with(v, Tensor(v.shape())); }

Tensor QuantActLayer::na_forward(const Tensor& v, Rng& rng) {
  if (!noise_enabled_) return forward_with(v, Tensor(v.shape()));
  Tensor out = forward_with(v, sample_noise(rng, v.shape()));
  cache_->sampled = true;
  return out;
}

Tensor QuantActLayer::na_forward(const Tensor& v, const Tensor& eps) {
  if (eps.shape() != v.shape())
    throw ShapeError("noise shape " + to_string(eps.shape()) + " does not match input " + to_string(v.shape()));
  for (double e : eps.data())
    if (!(e > -0.5 && e < 0.5)) throw ConfigError("noise entries must lie in (-0.5, 0.5)");
  Tensor out = forward_with(v, eps);
  cache_->sampled = true;
  return out;
}

Tensor QuantActLayer::backward_cached(const Tensor& grad_out, const char* who) {
  if (!cache_) throw StateError(std::string(who) + " called without a matching forward pass");
  const QuantCache& c = *cache_;
  if (grad_out.shape() != c.x.shape())
    throw ShapeError(std::string(who) + ": grad_out " + to_string(grad_out.shape()) + " does not match activation " +
                     to_string(c.x.shape()));
  Tensor grad_v(grad_out.shape());
  double gs = 0.0;
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const double y = c.x[i] + c.eps[i];
    grad_v[i] = grad_out[i] * quant::grad_v(y, p_);
    gs += grad_out[i] * quant::grad_s(y, p_);
  }
  grad_s_ += gs;
  cache_.reset();
  return grad_v;
}

Tensor QuantActLayer::quant_backward(const Tensor& grad_out) {
  if (cache_ && cache_->sampled) throw StateError("quant_backward called after a noisy forward pass");
  return backward_cached(grad_out, "quant_backward");
}

Tensor QuantActLayer::na_backward(const Tensor& grad_out) { return backward_cached(grad_out, "na_backward"); }

Tensor QuantActLayer::expected_activation(const Tensor& v) const {
  const double hi = checked_scale() * p_;
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i], 0.0, hi);
  return out;
}

Tensor QuantActLayer::expected_forward(const Tensor& v) {
  Tensor out = expected_activation(v);
  surrogate_input_ = v;
  return out;
}

Tensor QuantActLayer::expected_backward(const Tensor& grad_out) {
  if (!surrogate_input_) throw StateError("expected_backward called without a matching forward pass");
  const Tensor& v = *surrogate_input_;
  if (grad_out.shape() != v.shape()) throw ShapeError("expected_backward: grad_out shape mismatch");
  const double hi = checked_scale() * p_;
  Tensor grad_v(v.shape());
  double gs = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0 && v[i] < hi) grad_v[i] = grad_out[i];
    if (v[i] >= hi) gs += grad_out[i] * p_;
  }
  grad_s_ += gs;
  surrogate_input_.reset();
  return grad_v;
}

}  // namespace qsnn
