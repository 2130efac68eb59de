#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qsnn/layers.hpp"
#include "qsnn/quant.hpp"
#include "qsnn/rng.hpp"
#include "qsnn/tensor.hpp"

namespace qsnn {

// Plain rectifier, used for float pretraining before activations are
// quantized. A network containing one cannot be converted.
class ReluLayer {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

 private:
  std::optional<Tensor> cached_input_;
};

// Average pooling inside a flat (batch × features) network: features are
// read as channels × height × width.
struct PoolBlock {
  std::size_t channels = 1, height = 1, width = 1;
  AvgPoolLayer pool{{1, 1}, {1, 1}};

  std::size_t in_features() const { return channels * height * width; }
  std::size_t out_features() const;
  // Pooling of a flat (rank 1 or 2) tensor.
  Tensor apply(const Tensor& x) const;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

 private:
  Shape spatial_shape(const Tensor& x) const;
};

using Block = std::variant<AffineLayer, PoolBlock, QuantActLayer, ReluLayer>;

std::string block_name(const Block& block);

enum class ForwardMode {
  deterministic,  // quant layers use the deterministic rounding path
  training,       // quant layers use the noise adaptor when it is enabled
  expected,       // quant layers replaced by their mean clip(v, 0, s·p)
};

// One trainable array and its gradient, as seen by the optimizer.
struct ParamRef {
  std::span<double> value;
  std::span<double> grad;
  bool decay = true;     // subject to weight decay
  bool is_scale = false; // quantization scale, clamped after each update
};

// Feed-forward stack of affine / pooling / activation blocks ending in an
// affine classifier head.
class QuantNet {
 public:
  QuantNet() = default;
  explicit QuantNet(std::vector<Block> blocks);

  // widths = {in, hidden..., classes}. Every hidden layer is affine followed
  // by a quantized activation with ceiling p; weights use He-normal init.
  static QuantNet mlp(std::span<const std::size_t> widths, int p, bool noise_adaptor, std::uint64_t seed);
  // Same topology with plain rectifiers, for float pretraining.
  static QuantNet relu_mlp(std::span<const std::size_t> widths, std::uint64_t seed);

  const std::vector<Block>& blocks() const { return blocks_; }
  std::vector<Block>& blocks() { return blocks_; }

  std::size_t input_features() const;
  std::size_t num_classes() const;

  Tensor forward(const Tensor& x, ForwardMode mode, Rng* rng = nullptr);
  // Deterministic activations after every block (the last entry is the
  // logits).
  std::vector<Tensor> forward_trace(const Tensor& x);
  Tensor backward(const Tensor& grad_logits);

  void zero_grad();
  std::vector<ParamRef> parameters();

  // Replace every rectifier with a quantized activation (scale initialized
  // lazily on the first training batch).
  void quantize_activations(int p, bool noise_adaptor);
  void set_noise_adaptor(bool on);
  void clamp_scales();

 private:
  void check_topology() const;

  std::vector<Block> blocks_;
  std::optional<ForwardMode> last_mode_;
};

}  // namespace qsnn
