#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qsnn/dataset.hpp"
#include "qsnn/network.hpp"

namespace qsnn {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double lr_max = 0.1;
  double lr_min = 0.0;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  int p = 2;
  bool noise_adaptor = false;

  void validate() const;
};

// Stable 64-bit hash of the canonical JSON form of the config, as hex.
std::string config_hash(const TrainConfig& cfg);
// FNV-1a 64 of `text`, as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

// lr_min + ½(lr_max − lr_min)(1 + cos(π·t/total)).
double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min);

// SGD with momentum. Weight decay is applied as an exact multiplicative
// shrink w ← w·(1 − lr·λ) before the momentum step, so a zero-gradient step
// scales weights by exactly (1 − lr·λ). Scales are never decayed and are
// clamped to kMinScale afterwards.
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
  void step(std::span<const ParamRef> params, double lr);

 private:
  double momentum_, weight_decay_;
  std::vector<std::vector<double>> velocity_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double eval_accuracy = 0.0;
};

using History = std::vector<EpochRecord>;

// Shuffled minibatch training. Each epoch's permutation comes from
// Rng::derive(seed, epoch) and each step's noise stream from a separate
// derived seed, so the whole run is a function of (net, data, cfg).
// `eval` defaults to `data` when null. Throws DivergenceError on a
// non-finite loss.
History train(QuantNet& net, const Dataset& data, const TrainConfig& cfg, const Dataset* eval = nullptr);

// Deterministic-path accuracy (noise off, argmax with lowest-index ties).
double evaluate_ann(QuantNet& net, const Dataset& data);

// Deterministic-path predictions, one per sample.
std::vector<std::size_t> predict_ann(QuantNet& net, const Tensor& features);

}  // namespace qsnn
