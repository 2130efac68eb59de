#include "qsnn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "qsnn/error.hpp"
#include "qsnn/rng.hpp"

namespace qsnn {

namespace {
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;  // "noise"
constexpr std::size_t kEvalChunk = 256;
}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr_max >= 0.0)) throw ConfigError("lr_max must be non-negative");
  if (!(lr_min >= 0.0) || lr_min > lr_max) throw ConfigError("need 0 <= lr_min <= lr_max");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (p < 1) throw ConfigError("p must be >= 1");
}

std::string config_hash(const TrainConfig& cfg) {
  const nlohmann::json j = {{"epochs", cfg.epochs},   {"batch_size", cfg.batch_size},
                            {"lr_max", cfg.lr_max},   {"lr_min", cfg.lr_min},
                            {"weight_decay", cfg.weight_decay}, {"momentum", cfg.momentum},
                            {"seed", cfg.seed},       {"p", cfg.p},
                            {"noise_adaptor", cfg.noise_adaptor}};
  return fnv1a_hex(j.dump());
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min) {
  if (total == 0) throw ConfigError("cosine schedule needs a positive step count");
  if (t > total) throw ConfigError("cosine schedule step " + std::to_string(t) + " beyond total " + std::to_string(total));
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

void Sgd::step(std::span<const ParamRef> params, double lr) {
  if (velocity_.size() != params.size()) {
    velocity_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) velocity_[i].resize(params[i].value.size(), 0.0);
  }
  const double shrink = 1.0 - lr * weight_decay_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamRef& p = params[i];
    auto& v = velocity_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      v[k] = momentum_ * v[k] + p.grad[k];
      if (p.decay) p.value[k] *= shrink;
      p.value[k] -= lr * v[k];
    }
    if (p.is_scale)
      for (double& s : p.value) s = std::max(s, kMinScale);
  }
}

std::vector<std::size_t> predict_ann(QuantNet& net, const Tensor& features) {
  std::vector<std::size_t> out;
  out.reserve(features.rows());
  const std::size_t n = features.rows(), d = features.row_size();
  for (std::size_t begin = 0; begin < n; begin += kEvalChunk) {
    const std::size_t m = std::min(kEvalChunk, n - begin);
    Tensor chunk({m, d}, std::vector<double>(features.data().begin() + static_cast<std::ptrdiff_t>(begin * d),
                                             features.data().begin() + static_cast<std::ptrdiff_t>((begin + m) * d)));
    Tensor logits = net.forward(chunk, ForwardMode::deterministic);
    for (std::size_t r = 0; r < m; ++r) out.push_back(argmax(logits.row(r)));
  }
  return out;
}

double evaluate_ann(QuantNet& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const auto pred = predict_ann(net, data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

History train(QuantNet& net, const Dataset& data, const TrainConfig& cfg, const Dataset* eval) {
  cfg.validate();
  data.validate();
  if (data.size() == 0) throw ConfigError("training dataset is empty");
  if (data.dims() != net.input_features())
    throw ShapeError("dataset has " + std::to_string(data.dims()) + " features, network expects " +
                     std::to_string(net.input_features()));
  if (data.num_classes > net.num_classes())
    throw ShapeError("dataset has " + std::to_string(data.num_classes) + " classes, network head has " +
                     std::to_string(net.num_classes()));

  const std::size_t n = data.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = cfg.epochs * batches;
  Sgd opt(cfg.momentum, cfg.weight_decay);
  History history;
  std::vector<std::size_t> order(n);
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler(Rng::derive(cfg.seed, epoch));
    shuffler.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;

    for (std::size_t b = 0; b < batches; ++b, ++step) {
      const std::size_t begin = b * cfg.batch_size, end = std::min(n, begin + cfg.batch_size);
      Dataset batch = data.gather(std::span<const std::size_t>(order).subspan(begin, end - begin));
      Rng noise(Rng::derive(cfg.seed ^ kNoiseStream, step));

      Tensor logits;
      try {
        logits = net.forward(batch.features, ForwardMode::training, &noise);
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                              ": " + e.what());
      }
      LossAndGrad lg = softmax_cross_entropy(logits, batch.labels);
      if (!std::isfinite(lg.loss))
        throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step));
      net.zero_grad();
      net.backward(lg.grad);
      opt.step(net.parameters(), cosine_lr(step, total, cfg.lr_max, cfg.lr_min));
      loss_sum += lg.loss * static_cast<double>(end - begin);
    }
    history.push_back({epoch, loss_sum / static_cast<double>(n), evaluate_ann(net, eval ? *eval : data)});
  }
  return history;
}

}  // namespace qsnn
