#include "qsnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "qsnn/detail/overloaded.hpp"
#include "qsnn/error.hpp"

namespace qsnn {

using detail::overloaded;

Tensor ReluLayer::forward(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(x[i], 0.0);
  cached_input_ = x;
  return y;
}

Tensor ReluLayer::backward(const Tensor& grad_out) {
  if (!cached_input_) throw StateError("relu backward called without a preceding forward");
  if (grad_out.shape() != cached_input_->shape()) throw ShapeError("relu grad_out shape mismatch");
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (*cached_input_)[i] > 0.0 ? grad_out[i] : 0.0;
  cached_input_.reset();
  return g;
}

std::size_t PoolBlock::out_features() const {
  const Shape out = pool.output_shape({channels, height, width});
  return shape_size(out);
}

Shape PoolBlock::spatial_shape(const Tensor& x) const {
  if (x.row_size() != in_features())
    throw ShapeError("pool block expects " + std::to_string(in_features()) + " features, got " + to_string(x.shape()));
  if (x.rank() == 1) return {channels, height, width};
  return {x.rows(), channels, height, width};
}

Tensor PoolBlock::apply(const Tensor& x) const {
  Tensor y = pool.apply(x.reshaped(spatial_shape(x)));
  return x.rank() == 1 ? y.reshaped({y.size()}) : y.reshaped({x.rows(), y.size() / x.rows()});
}

Tensor PoolBlock::forward(const Tensor& x) {
  Tensor y = pool.forward(x.reshaped(spatial_shape(x)));
  return x.rank() == 1 ? y.reshaped({y.size()}) : y.reshaped({x.rows(), y.size() / x.rows()});
}

Tensor PoolBlock::backward(const Tensor& grad_out) {
  const std::size_t n = grad_out.rank() == 1 ? 1 : grad_out.rows();
  Shape out = pool.output_shape({channels, height, width});
  if (grad_out.rank() != 1) out.insert(out.begin(), n);
  Tensor g = pool.backward(grad_out.reshaped(out));
  return grad_out.rank() == 1 ? g.reshaped({g.size()}) : g.reshaped({n, in_features()});
}

std::string block_name(const Block& block) {
  return std::visit(overloaded{[](const AffineLayer&) { return std::string("affine"); },
                               [](const PoolBlock&) { return std::string("avgpool"); },
                               [](const QuantActLayer&) { return std::string("quant"); },
                               [](const ReluLayer&) { return std::string("relu"); }},
                    block);
}

QuantNet::QuantNet(std::vector<Block> blocks) : blocks_(std::move(blocks)) { check_topology(); }

void QuantNet::check_topology() const {
  if (blocks_.empty()) throw ConfigError("network has no blocks");
  if (!std::holds_alternative<AffineLayer>(blocks_.back()))
    throw ConfigError("network must end in an affine classifier head");
  std::optional<std::size_t> width;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    std::optional<std::size_t> in, out;
    if (auto* a = std::get_if<AffineLayer>(&b)) {
      in = a->in_features();
      out = a->out_features();
    } else if (auto* pb = std::get_if<PoolBlock>(&b)) {
      in = pb->in_features();
      out = pb->out_features();
    }
    if (in && width && *in != *width)
      throw ShapeError("block " + std::to_string(i) + " (" + block_name(b) + ") expects " + std::to_string(*in) +
                       " features but receives " + std::to_string(*width));
    if (out) width = out;
  }
}

static std::vector<Block> build_mlp(std::span<const std::size_t> widths, std::uint64_t seed,
                                    const std::function<Block()>& activation) {
  if (widths.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
  Rng rng(seed);
  std::vector<Block> blocks;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    AffineLayer a(widths[l], widths[l + 1]);
    const double sd = std::sqrt(2.0 / static_cast<double>(widths[l]));
    for (double& w : a.W().data()) w = sd * rng.normal();
    blocks.emplace_back(std::move(a));
    if (l + 2 < widths.size()) blocks.push_back(activation());
  }
  return blocks;
}

QuantNet QuantNet::mlp(std::span<const std::size_t> widths, int p, bool noise_adaptor, std::uint64_t seed) {
  return QuantNet(build_mlp(widths, seed, [&] { return Block(QuantActLayer(p, noise_adaptor)); }));
}

QuantNet QuantNet::relu_mlp(std::span<const std::size_t> widths, std::uint64_t seed) {
  return QuantNet(build_mlp(widths, seed, [] { return Block(ReluLayer{}); }));
}

std::size_t QuantNet::input_features() const {
  for (const Block& b : blocks_) {
    if (auto* a = std::get_if<AffineLayer>(&b)) return a->in_features();
    if (auto* p = std::get_if<PoolBlock>(&b)) return p->in_features();
  }
  throw ConfigError("network has no affine or pooling block");
}

std::size_t QuantNet::num_classes() const { return std::get<AffineLayer>(blocks_.back()).out_features(); }

Tensor QuantNet::forward(const Tensor& x, ForwardMode mode, Rng* rng) {
  if (mode == ForwardMode::training && !rng) throw StateError("training forward pass needs an Rng");
  Tensor h = x;
  for (Block& b : blocks_) {
    h = std::visit(overloaded{[&](AffineLayer& a) { return a.forward(h); },
                              [&](PoolBlock& p) { return p.forward(h); },
                              [&](ReluLayer& r) { return r.forward(h); },
                              [&](QuantActLayer& q) {
                                switch (mode) {
                                  case ForwardMode::training:
                                    if (!q.scale_initialized()) q.init_scale_from(h);
                                    return q.na_forward(h, *rng);
                                  case ForwardMode::expected:
                                    return q.expected_forward(h);
                                  case ForwardMode::deterministic:
                                    break;
                                }
                                return q.quant_forward(h);
                              }},
                   b);
  }
  last_mode_ = mode;
  return h;
}

std::vector<Tensor> QuantNet::forward_trace(const Tensor& x) {
  std::vector<Tensor> out;
  Tensor h = x;
  for (Block& b : blocks_) {
    h = std::visit(overloaded{[&](AffineLayer& a) { return a.forward(h); },
                              [&](PoolBlock& p) { return p.forward(h); },
                              [&](ReluLayer& r) { return r.forward(h); },
                              [&](QuantActLayer& q) { return q.quant_forward(h); }},
                   b);
    out.push_back(h);
  }
  last_mode_ = ForwardMode::deterministic;
  return out;
}

Tensor QuantNet::backward(const Tensor& grad_logits) {
  if (!last_mode_) throw StateError("network backward called without a preceding forward");
  const ForwardMode mode = *last_mode_;
  Tensor g = grad_logits;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    g = std::visit(overloaded{[&](AffineLayer& a) { return a.backward(g); },
                              [&](PoolBlock& p) { return p.backward(g); },
                              [&](ReluLayer& r) { return r.backward(g); },
                              [&](QuantActLayer& q) {
                                switch (mode) {
                                  case ForwardMode::training:
                                    return q.na_backward(g);
                                  case ForwardMode::expected:
                                    return q.expected_backward(g);
                                  case ForwardMode::deterministic:
                                    break;
                                }
                                return q.quant_backward(g);
                              }},
                   *it);
  }
  last_mode_.reset();
  return g;
}

void QuantNet::zero_grad() {
  for (Block& b : blocks_) {
    if (auto* a = std::get_if<AffineLayer>(&b)) a->zero_grad();
    if (auto* q = std::get_if<QuantActLayer>(&b)) q->zero_grad();
  }
}

std::vector<ParamRef> QuantNet::parameters() {
  std::vector<ParamRef> out;
  for (Block& b : blocks_) {
    if (auto* a = std::get_if<AffineLayer>(&b)) {
      out.push_back({a->W().data(), a->grad_W().data(), true, false});
      out.push_back({a->B().data(), a->grad_B().data(), true, false});
    } else if (auto* q = std::get_if<QuantActLayer>(&b); q && q->scale_initialized()) {
      out.push_back({std::span<double>(&q->scale_ref(), 1), std::span<double>(&q->grad_s_ref(), 1), false, true});
    }
  }
  return out;
}

void QuantNet::quantize_activations(int p, bool noise_adaptor) {
  for (Block& b : blocks_)
    if (std::holds_alternative<ReluLayer>(b)) b = QuantActLayer(p, noise_adaptor);
}

void QuantNet::set_noise_adaptor(bool on) {
  for (Block& b : blocks_)
    if (auto* q = std::get_if<QuantActLayer>(&b)) q->set_noise_enabled(on);
}

void QuantNet::clamp_scales() {
  for (Block& b : blocks_)
    if (auto* q = std::get_if<QuantActLayer>(&b); q && q->scale_initialized())
      q->scale_ref() = std::max(q->scale_ref(), kMinScale);
}

}  // namespace qsnn
