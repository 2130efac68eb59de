#pragma once

#include <cstddef>
#include <filesystem>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "qsnn/checkpoint.hpp"
#include "qsnn/network.hpp"

namespace qsnn {

// Linear (affine or pooling) operations between spiking layers. They act on
// spike-weighted signals z·th, so pooling converts to itself.
struct AffineOp {
  Tensor W, B;
};
struct PoolOp {
  PoolBlock pool;
};
using LinearOp = std::variant<AffineOp, PoolOp>;

// Applies a chain of linear ops. With `with_bias` false the affine biases
// are skipped, giving the purely linear part.
Tensor apply_chain(const std::vector<LinearOp>& chain, const Tensor& x, bool with_bias = true);
std::size_t chain_out_features(const std::vector<LinearOp>& chain, std::size_t in);

// One integrate-and-fire population, fed by `synapse` applied to the
// previous layer's spike-weighted output (or to the analog input).
struct SnnLayer {
  std::vector<LinearOp> synapse;
  double th = 1.0;  // p·s of the source activation
  int p = 1;
  double s = 1.0;
  std::size_t source_block = 0;  // index of the quant block in the source net
  std::size_t size = 0;
};

// Converted network. Parameters only; membrane state lives in SnnState so
// one net can drive many independent simulations.
struct SnnNet {
  std::vector<SnnLayer> layers;
  std::vector<LinearOp> head;  // non-spiking integrator
  double precharge = 0.5;      // initial membrane potential as a fraction of th
  double dt_ms = 1.0;
  std::size_t inputs = 0;
  std::size_t classes = 0;
};

struct LayerState {
  std::vector<double> u;       // membrane potential
  std::vector<double> u0;      // potential right after reset
  std::vector<double> charge;  // Σ input drive since reset
  std::vector<int> z_prev;     // spikes of the previous step
  std::vector<int> count;      // signed spike count since reset
  std::vector<int> events;     // spike events of either sign since reset
};

struct SnnState {
  std::vector<LayerState> layers;
  std::vector<double> head_acc;  // accumulated output drive
  std::size_t t = 0;
};

// W̃ = W and B̃ = B copied verbatim, th = p·s per quant layer. Throws
// ConversionError naming the block when a hidden activation is not a
// quantized activation.
SnnNet convert(const QuantNet& net);

// u = precharge·th, z_prev = 0, counters and the output accumulator zeroed.
void reset_state(const SnnNet& snn, SnnState& state);
SnnState initial_state(const SnnNet& snn);

// Affine parameters of the converted net in source order.
std::vector<AffineOp> affine_parameters(const SnnNet& snn);

// Checkpoint with an added "snn" section (thresholds, pre-charge fraction).
nlohmann::json snn_section(const SnnNet& snn);
void save_snn_checkpoint(const QuantNet& source, const SnnNet& snn, const std::filesystem::path& path,
                         const CheckpointMeta& meta = {});
// Loads a checkpoint and converts it. When an "snn" section is present its
// thresholds must match the reconverted ones bit for bit.
SnnNet load_snn_checkpoint(const std::filesystem::path& path);
SnnNet snn_from_checkpoint(const Checkpoint& ckpt);

}  // namespace qsnn
