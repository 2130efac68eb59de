#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>

#include "qsnn/tensor.hpp"

namespace qsnn {

// y = W·x + B for every row of x. W is (out × in), B is (out). x is either a
// single sample (rank 1) or a batch (rank 2, batch leading). The summation
// order is fixed so the ANN and the spiking simulator, which both call this,
// produce bit-identical currents for identical inputs.
Tensor affine_apply(const Tensor& W, const Tensor& B, const Tensor& x);

// Same as affine_apply with B omitted.
Tensor linear_apply(const Tensor& W, const Tensor& x);

class AffineLayer {
 public:
  AffineLayer() = default;
  AffineLayer(Tensor W, Tensor B);
  AffineLayer(std::size_t in, std::size_t out);

  std::size_t in_features() const { return W_.dim(1); }
  std::size_t out_features() const { return W_.dim(0); }

  Tensor forward(const Tensor& x);
  // Accumulates into grad_W / grad_B and returns Wᵀ·grad_out. Consumes the
  // cached input.
  Tensor backward(const Tensor& grad_out);
  void zero_grad();

  Tensor& W() { return W_; }
  Tensor& B() { return B_; }
  const Tensor& W() const { return W_; }
  const Tensor& B() const { return B_; }
  Tensor& grad_W() { return grad_W_; }
  Tensor& grad_B() { return grad_B_; }
  const Tensor& grad_W() const { return grad_W_; }
  const Tensor& grad_B() const { return grad_B_; }
  bool has_cached_input() const { return cached_input_.has_value(); }

 private:
  Tensor W_, B_, grad_W_, grad_B_;
  std::optional<Tensor> cached_input_;
};

struct Window2d {
  std::size_t h = 1;
  std::size_t w = 1;
  friend bool operator==(const Window2d&, const Window2d&) = default;
};

// Average pooling over the last two dimensions; leading dimensions are kept.
class AvgPoolLayer {
 public:
  AvgPoolLayer(Window2d window, Window2d stride);

  const Window2d& window() const { return window_; }
  const Window2d& stride() const { return stride_; }

  Shape output_shape(const Shape& input) const;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

  // Stateless pooling, shared with the spiking simulator.
  Tensor apply(const Tensor& x) const;

 private:
  Window2d window_, stride_;
  std::optional<Shape> cached_input_shape_;
};

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

// Max-subtracted softmax followed by cross entropy against `label`.
LossAndGrad softmax_cross_entropy(std::span<const double> logits, std::size_t label);
LossAndGrad softmax_cross_entropy(const Tensor& logits, std::size_t label);

// Batch version: mean loss over rows, gradient scaled by 1/batch.
LossAndGrad softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace qsnn
