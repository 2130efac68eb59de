#include "qsnn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "qsnn/error.hpp"

namespace qsnn {

namespace {

void check_affine(const Tensor& W, const Tensor& x) {
  if (W.rank() != 2) throw ShapeError("affine weight must be rank 2, got " + to_string(W.shape()));
  if (x.rank() != 1 && x.rank() != 2)
    throw ShapeError("affine input must be rank 1 or 2, got " + to_string(x.shape()));
  if (x.row_size() != W.dim(1))
    throw ShapeError("affine input " + to_string(x.shape()) + " does not match weight " + to_string(W.shape()));
}

Tensor affine_impl(const Tensor& W, const Tensor* B, const Tensor& x) {
  check_affine(W, x);
  const std::size_t out = W.dim(0), in = W.dim(1), n = x.rows();
  Tensor y = x.rank() == 1 ? Tensor({out}) : Tensor({n, out});
  for (std::size_t r = 0; r < n; ++r) {
    auto xr = x.row(r);
    auto yr = y.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = W.data().data() + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * xr[i];
      yr[o] = B ? acc + (*B)[o] : acc;
    }
  }
  return y;
}

}  // namespace

Tensor affine_apply(const Tensor& W, const Tensor& B, const Tensor& x) {
  if (B.rank() != 1 || B.dim(0) != W.dim(0))
    throw ShapeError("affine bias " + to_string(B.shape()) + " does not match weight " + to_string(W.shape()));
  return affine_impl(W, &B, x);
}

Tensor linear_apply(const Tensor& W, const Tensor& x) { return affine_impl(W, nullptr, x); }

AffineLayer::AffineLayer(Tensor W, Tensor B) : W_(std::move(W)), B_(std::move(B)) {
  if (W_.rank() != 2 || B_.rank() != 1 || B_.dim(0) != W_.dim(0))
    throw ShapeError("affine layer needs W (out×in) and B (out), got " + to_string(W_.shape()) + " and " +
                     to_string(B_.shape()));
  grad_W_ = Tensor(W_.shape());
  grad_B_ = Tensor(B_.shape());
}

AffineLayer::AffineLayer(std::size_t in, std::size_t out) : AffineLayer(Tensor({out, in}), Tensor({out})) {}

Tensor AffineLayer::forward(const Tensor& x) {
  Tensor y = affine_apply(W_, B_, x);
  cached_input_ = x;
  return y;
}

Tensor AffineLayer::backward(const Tensor& grad_out) {
  if (!cached_input_) throw StateError("affine backward called without a preceding forward");
  const Tensor& x = *cached_input_;
  const std::size_t out = W_.dim(0), in = W_.dim(1), n = x.rows();
  if (grad_out.rank() != x.rank() || grad_out.rows() != n || grad_out.row_size() != out)
    throw ShapeError("affine grad_out " + to_string(grad_out.shape()) + " does not match output of input " +
                     to_string(x.shape()));

  Tensor grad_in(x.shape());
  for (std::size_t r = 0; r < n; ++r) {
    auto xr = x.row(r);
    auto gr = grad_out.row(r);
    auto gi = grad_in.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const double g = gr[o];
      grad_B_[o] += g;
      double* gw = &grad_W_[o * in];
      const double* w = &W_[o * in];
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += g * xr[i];
        gi[i] += w[i] * g;
      }
    }
  }
  cached_input_.reset();
  return grad_in;
}

void AffineLayer::zero_grad() {
  grad_W_.fill(0.0);
  grad_B_.fill(0.0);
}

AvgPoolLayer::AvgPoolLayer(Window2d window, Window2d stride) : window_(window), stride_(stride) {
  if (!window_.h || !window_.w || !stride_.h || !stride_.w)
    throw ShapeError("pooling window and stride must be positive");
}

Shape AvgPoolLayer::output_shape(const Shape& in) const {
  if (in.size() < 2) throw ShapeError("avgpool input needs at least 2 dims, got " + to_string(in));
  const std::size_t H = in[in.size() - 2], W = in.back();
  if (H < window_.h || W < window_.w || (H - window_.h) % stride_.h || (W - window_.w) % stride_.w)
    throw ShapeError("avgpool window " + std::to_string(window_.h) + "x" + std::to_string(window_.w) + " stride " +
                     std::to_string(stride_.h) + "x" + std::to_string(stride_.w) + " does not tile input " +
                     to_string(in));
  Shape out = in;
  out[in.size() - 2] = (H - window_.h) / stride_.h + 1;
  out.back() = (W - window_.w) / stride_.w + 1;
  return out;
}

Tensor AvgPoolLayer::apply(const Tensor& x) const {
  const Shape out_shape = output_shape(x.shape());
  const std::size_t H = x.shape()[x.rank() - 2], W = x.shape().back();
  const std::size_t OH = out_shape[x.rank() - 2], OW = out_shape.back();
  const std::size_t planes = x.size() / (H * W);
  const double area = static_cast<double>(window_.h * window_.w);
  Tensor y(out_shape);
  for (std::size_t c = 0; c < planes; ++c) {
    const double* src = x.data().data() + c * H * W;
    double* dst = &y[c * OH * OW];
    for (std::size_t oh = 0; oh < OH; ++oh)
      for (std::size_t ow = 0; ow < OW; ++ow) {
        double acc = 0.0;
        for (std::size_t kh = 0; kh < window_.h; ++kh)
          for (std::size_t kw = 0; kw < window_.w; ++kw)
            acc += src[(oh * stride_.h + kh) * W + ow * stride_.w + kw];
        dst[oh * OW + ow] = acc / area;
      }
  }
  return y;
}

Tensor AvgPoolLayer::forward(const Tensor& x) {
  Tensor y = apply(x);
  cached_input_shape_ = x.shape();
  return y;
}

Tensor AvgPoolLayer::backward(const Tensor& grad_out) {
  if (!cached_input_shape_) throw StateError("avgpool backward called without a preceding forward");
  const Shape in_shape = *cached_input_shape_;
  const Shape out_shape = output_shape(in_shape);
  if (grad_out.shape() != out_shape)
    throw ShapeError("avgpool grad_out " + to_string(grad_out.shape()) + " expected " + to_string(out_shape));
  const std::size_t H = in_shape[in_shape.size() - 2], W = in_shape.back();
  const std::size_t OH = out_shape[out_shape.size() - 2], OW = out_shape.back();
  const std::size_t planes = shape_size(in_shape) / (H * W);
  const double area = static_cast<double>(window_.h * window_.w);
  Tensor grad_in(in_shape);
  for (std::size_t c = 0; c < planes; ++c) {
    double* dst = &grad_in[c * H * W];
    const double* src = grad_out.data().data() + c * OH * OW;
    for (std::size_t oh = 0; oh < OH; ++oh)
      for (std::size_t ow = 0; ow < OW; ++ow) {
        const double g = src[oh * OW + ow] / area;
        for (std::size_t kh = 0; kh < window_.h; ++kh)
          for (std::size_t kw = 0; kw < window_.w; ++kw) dst[(oh * stride_.h + kh) * W + ow * stride_.w + kw] += g;
      }
  }
  cached_input_shape_.reset();
  return grad_in;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

LossAndGrad softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (logits.empty()) throw ShapeError("softmax over empty logits");
  if (label >= logits.size())
    throw ShapeError("label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) +
                     " classes");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = std::log(z);
  LossAndGrad out{log_z - (logits[label] - m), Tensor({logits.size()})};
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - m - log_z);
  out.grad[label] -= 1.0;
  return out;
}

LossAndGrad softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 1) throw ShapeError("expected 1-D logits, got " + to_string(logits.shape()));
  return softmax_cross_entropy(logits.data(), label);
}

LossAndGrad softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.rows() != labels.size())
    throw ShapeError("batch logits " + to_string(logits.shape()) + " do not match " + std::to_string(labels.size()) +
                     " labels");
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  LossAndGrad out{0.0, Tensor(logits.shape())};
  for (std::size_t r = 0; r < labels.size(); ++r) {
    auto one = softmax_cross_entropy(logits.row(r), labels[r]);
    out.loss += one.loss;
    auto g = out.grad.row(r);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = one.grad[i] * inv_n;
  }
  out.loss *= inv_n;
  return out;
}

}  // namespace qsnn
