#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qsnn/converter.hpp"

namespace qsnn {

enum class Correction { none, negative_spikes, two_stage_offset };
enum class Readout {
  accumulated,   // argmax of the summed output drive
  instantaneous  // argmax of the current step's output drive
};

std::string to_string(Correction c);
Correction parse_correction(const std::string& name);

// One integrate-and-fire update with reset by subtraction and a one-step
// reset lag:
//   u ← u + current − z_prev·th,   z = Θ(u − th)   (Θ(0) = 1).
// With `negative_spikes`, a neuron whose potential drops below zero while
// its running count is positive emits −1 instead.
inline int if_update(double& u, double current, int z_prev, double th, bool negative_spikes, int count) {
  u = u + current - z_prev * th;
  if (u >= th) return 1;
  if (negative_spikes && u < 0.0 && count > 0) return -1;
  return 0;
}

// Spike count of a neuron that integrates total charge `charge` as a
// constant current over T steps from a 0.5·th pre-charge:
// clip(floor((0.5·th + charge)/th), 0, T).
int ideal_count(double charge, double th, std::size_t T);

struct TraceRow {
  std::size_t sample = 0, layer = 0, neuron = 0, t = 0;
  double u = 0.0;
  int z = 0;
  double input_current = 0.0;
};

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows);

// Per-sample simulation driver. begin() resets the state and latches the
// analog input; step() then advances one Δt. Stepping without begin() is an
// error, so state cannot leak between samples.
class Session {
 public:
  explicit Session(const SnnNet& snn, Correction correction = Correction::none, bool record_trace = false);

  void begin(const Tensor& x, std::size_t sample_index = 0);
  // Advances one step and returns this step's output drive.
  const std::vector<double>& step();

  std::size_t t() const { return state_.t; }
  const SnnState& state() const { return state_; }
  const std::vector<double>& accumulated() const { return state_.head_acc; }
  const std::vector<double>& last_output() const { return last_output_; }
  // Per-layer spike-weighted outputs z·th of the last step.
  const std::vector<Tensor>& layer_outputs() const { return outputs_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  void clear_trace() { trace_.clear(); }

  // max over neurons of |u_t − u_0 − Σc + th·Σ_{τ<t} z_τ| from running sums.
  double residual(std::size_t layer) const;
  // Σ over hidden layers of spike events so far.
  std::size_t spike_events() const;

 private:
  const SnnNet* snn_;
  Correction correction_;
  bool record_trace_;
  bool active_ = false;
  std::size_t sample_ = 0;
  SnnState state_;
  Tensor first_current_;
  std::vector<Tensor> outputs_;
  std::vector<double> last_output_;
  std::vector<TraceRow> trace_;
};

struct SimConfig {
  std::size_t T = 1;
  Correction correction = Correction::none;
  bool record_trace = false;
  Readout readout = Readout::accumulated;

  void validate() const;
};

struct SimResult {
  std::size_t T = 0, samples = 0, classes = 0;
  Tensor logits;                                 // [T, samples, classes] per readout
  std::vector<std::vector<std::size_t>> predictions;  // [T][samples]
  std::vector<double> accuracy;                  // [T], empty without labels
  std::vector<double> spikes_per_sample;         // [T], hidden spike events per sample
  std::vector<double> layer_spikes;              // per layer, total events at T over all samples
  std::vector<double> residuals;                 // per layer, max conservation residual
  std::vector<double> stage1_accuracy;           // two-stage mode only
  std::vector<TraceRow> trace;                   // when record_trace
};

// Runs every row of `features` for cfg.T steps from a fresh reset. Labels
// are optional. In two-stage-offset mode the returned result is the
// corrected one and stage1_accuracy holds the plain run.
SimResult simulate(const SnnNet& snn, const Tensor& features, std::span<const std::size_t> labels,
                   const SimConfig& cfg);

struct TwoStageResult {
  SimResult stage1, stage2;
};

// Stage 1 is a plain run recording each first-layer neuron's accumulated
// charge. Stage 2 recomputes, layer by layer, the ideal counts from that
// charge and from the corrected counts upstream, then replays the head.
TwoStageResult two_stage_offset(const SnnNet& snn, const Tensor& features, std::span<const std::size_t> labels,
                                const SimConfig& cfg);

// Conservation residual of one layer from a recorded trace (rows of a single
// sample; t = 0 rows hold the pre-charged state).
double conservation_audit(std::span<const TraceRow> rows, std::size_t layer, double th);

// Single-neuron runs driven by an explicit current schedule.
struct NeuronTrace {
  std::vector<double> u;  // after each step
  std::vector<int> z;
  int count = 0;
};

NeuronTrace simulate_neuron(std::span<const double> currents, double th, Correction correction,
                            double precharge = 0.5);

struct UnevennessReport {
  std::vector<double> schedule;
  double th = 1.0;
  NeuronTrace plain, negative;
  int two_stage_count = 0;
  int ann_state = 0;
  std::string text;
};

// A neuron with th = 1 driven by the schedule (default +2, −2): the plain
// simulation emits a spurious spike that the quantized ANN, seeing only the
// total drive, does not; both correction modes remove it.
UnevennessReport unevenness_demo(std::vector<double> schedule = {2.0, -2.0}, double th = 1.0);

}  // namespace qsnn
