#include "qsnn/snn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "qsnn/error.hpp"

namespace qsnn {

std::string to_string(Correction c) {
  switch (c) {
    case Correction::none:
      return "none";
    case Correction::negative_spikes:
      return "negative-spikes";
    case Correction::two_stage_offset:
      return "two-stage-offset";
  }
  return "?";
}

Correction parse_correction(const std::string& name) {
  if (name == "none") return Correction::none;
  if (name == "negative-spikes") return Correction::negative_spikes;
  if (name == "two-stage-offset") return Correction::two_stage_offset;
  throw ConfigError("unknown correction mode '" + name + "' (expected none, negative-spikes or two-stage-offset)");
}

int ideal_count(double charge, double th, std::size_t T) {
  const double k = std::floor((0.5 * th + charge) / th);
  return static_cast<int>(std::clamp(k, 0.0, static_cast<double>(T)));
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows) {
  out << "sample,layer,neuron,t,u,z,input_current\n";
  char buf[64];
  for (const TraceRow& r : rows) {
    out << r.sample << ',' << r.layer << ',' << r.neuron << ',' << r.t << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.u);
    out << buf << ',' << r.z << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.input_current);
    out << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// Session

Session::Session(const SnnNet& snn, Correction correction, bool record_trace)
    : snn_(&snn), correction_(correction), record_trace_(record_trace) {
  if (correction == Correction::two_stage_offset)
    throw ConfigError("two-stage offset correction runs through two_stage_offset(), not a Session");
}

void Session::begin(const Tensor& x, std::size_t sample_index) {
  if (x.size() != snn_->inputs)
    throw ShapeError("sample has " + std::to_string(x.size()) + " features, network expects " +
                     std::to_string(snn_->inputs));
  reset_state(*snn_, state_);
  const Tensor flat = x.rank() == 1 ? x : x.reshaped({x.size()});
  // Analog coding: the first layer receives W̃·x + B̃ as a constant current.
  first_current_ = snn_->layers.empty() ? flat : apply_chain(snn_->layers[0].synapse, flat);
  outputs_.clear();
  for (const SnnLayer& l : snn_->layers) outputs_.emplace_back(Shape{l.size});
  last_output_.assign(snn_->classes, 0.0);
  sample_ = sample_index;
  active_ = true;
  if (record_trace_)
    for (std::size_t l = 0; l < snn_->layers.size(); ++l)
      for (std::size_t i = 0; i < snn_->layers[l].size; ++i)
        trace_.push_back({sample_, l, i, 0, state_.layers[l].u[i], 0, 0.0});
}

const std::vector<double>& Session::step() {
  if (!active_) throw StateError("Session::step called before begin(); reset the state for each sample");
  const bool negative = correction_ == Correction::negative_spikes;
  const std::size_t t = state_.t + 1;
  for (std::size_t l = 0; l < snn_->layers.size(); ++l) {
    const SnnLayer& layer = snn_->layers[l];
    LayerState& ls = state_.layers[l];
    const Tensor current = l == 0 ? first_current_ : apply_chain(layer.synapse, outputs_[l - 1]);
    Tensor& out = outputs_[l];
    for (std::size_t i = 0; i < layer.size; ++i) {
      const double c = current[i];
      const int z = if_update(ls.u[i], c, ls.z_prev[i], layer.th, negative, ls.count[i]);
      ls.charge[i] += c;
      ls.count[i] += z;
      ls.events[i] += z != 0;
      ls.z_prev[i] = z;
      out[i] = static_cast<double>(z) * layer.th;
      if (record_trace_) trace_.push_back({sample_, l, i, t, ls.u[i], z, c});
    }
  }
  const Tensor head_in = outputs_.empty() ? first_current_ : outputs_.back();
  const Tensor drive = apply_chain(snn_->head, head_in);
  for (std::size_t k = 0; k < drive.size(); ++k) {
    last_output_[k] = drive[k];
    state_.head_acc[k] += drive[k];
  }
  state_.t = t;
  return last_output_;
}

double Session::residual(std::size_t layer) const {
  const LayerState& ls = state_.layers.at(layer);
  const double th = snn_->layers[layer].th;
  double worst = 0.0;
  for (std::size_t i = 0; i < ls.u.size(); ++i) {
    const double r = ls.u[i] - ls.u0[i] - ls.charge[i] + th * static_cast<double>(ls.count[i] - ls.z_prev[i]);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

std::size_t Session::spike_events() const {
  std::size_t n = 0;
  for (const LayerState& ls : state_.layers)
    for (int e : ls.events) n += static_cast<std::size_t>(e);
  return n;
}

// ---------------------------------------------------------------------------
// Batch simulation

void SimConfig::validate() const {
  if (T < 1) throw ConfigError("simulation needs T >= 1");
}

namespace {

SimResult empty_result(const SnnNet& snn, std::size_t n, std::size_t T, bool labeled) {
  SimResult r;
  r.T = T;
  r.samples = n;
  r.classes = snn.classes;
  r.logits = Tensor({T, n, snn.classes});
  r.predictions.assign(T, std::vector<std::size_t>(n, 0));
  if (labeled) r.accuracy.assign(T, 0.0);
  r.spikes_per_sample.assign(T, 0.0);
  r.layer_spikes.assign(snn.layers.size(), 0.0);
  r.residuals.assign(snn.layers.size(), 0.0);
  return r;
}

void record_step(SimResult& r, std::size_t t_index, std::size_t sample, std::span<const double> logits,
                 std::span<const std::size_t> labels) {
  std::copy(logits.begin(), logits.end(), r.logits.data().begin() + static_cast<std::ptrdiff_t>((t_index * r.samples + sample) * r.classes));
  const std::size_t pred = argmax(logits);
  r.predictions[t_index][sample] = pred;
  if (!labels.empty() && pred == labels[sample]) r.accuracy[t_index] += 1.0;
}

void finish(SimResult& r) {
  const double n = static_cast<double>(r.samples);
  for (double& a : r.accuracy) a /= n;
  for (double& s : r.spikes_per_sample) s /= n;
}

Tensor sample_row(const Tensor& features, std::size_t i) {
  auto row = features.row(i);
  return Tensor({row.size()}, std::vector<double>(row.begin(), row.end()));
}

void check_inputs(const SnnNet& snn, const Tensor& features, std::span<const std::size_t> labels) {
  if (features.rank() != 2 || features.row_size() != snn.inputs)
    throw ShapeError("features " + to_string(features.shape()) + " do not match network input " +
                     std::to_string(snn.inputs));
  if (!labels.empty() && labels.size() != features.rows())
    throw ShapeError("got " + std::to_string(labels.size()) + " labels for " + std::to_string(features.rows()) +
                     " samples");
}

}  // namespace

SimResult simulate(const SnnNet& snn, const Tensor& features, std::span<const std::size_t> labels,
                   const SimConfig& cfg) {
  cfg.validate();
  if (cfg.correction == Correction::two_stage_offset) {
    TwoStageResult both = two_stage_offset(snn, features, labels, cfg);
    both.stage2.stage1_accuracy = both.stage1.accuracy;
    return std::move(both.stage2);
  }
  check_inputs(snn, features, labels);
  const std::size_t n = features.rows();
  SimResult r = empty_result(snn, n, cfg.T, !labels.empty());
  Session session(snn, cfg.correction, cfg.record_trace);
  for (std::size_t i = 0; i < n; ++i) {
    session.begin(sample_row(features, i), i);
    for (std::size_t t = 0; t < cfg.T; ++t) {
      const auto& inst = session.step();
      record_step(r, t, i, cfg.readout == Readout::accumulated ? session.accumulated() : inst, labels);
      r.spikes_per_sample[t] += static_cast<double>(session.spike_events());
    }
    for (std::size_t l = 0; l < snn.layers.size(); ++l) {
      r.residuals[l] = std::max(r.residuals[l], session.residual(l));
      for (int e : session.state().layers[l].events) r.layer_spikes[l] += e;
    }
  }
  if (cfg.record_trace) r.trace = session.trace();
  finish(r);
  return r;
}

TwoStageResult two_stage_offset(const SnnNet& snn, const Tensor& features, std::span<const std::size_t> labels,
                                const SimConfig& cfg) {
  cfg.validate();
  check_inputs(snn, features, labels);
  const std::size_t n = features.rows(), L = snn.layers.size();
  TwoStageResult out{empty_result(snn, n, cfg.T, !labels.empty()), empty_result(snn, n, cfg.T, !labels.empty())};
  SimResult& s1 = out.stage1;
  SimResult& s2 = out.stage2;

  // Bias responses of every downstream chain, added once per elapsed step.
  std::vector<Tensor> layer_bias(L);
  for (std::size_t l = 1; l < L; ++l)
    layer_bias[l] = apply_chain(snn.layers[l].synapse, Tensor({snn.layers[l - 1].size}));
  const Tensor head_bias = apply_chain(snn.head, Tensor({L ? snn.layers.back().size : snn.inputs}));

  Session session(snn, Correction::none, cfg.record_trace);
  std::vector<double> prev(snn.classes);
  for (std::size_t i = 0; i < n; ++i) {
    session.begin(sample_row(features, i), i);
    std::fill(prev.begin(), prev.end(), 0.0);
    for (std::size_t t = 0; t < cfg.T; ++t) {
      const auto& inst = session.step();
      const bool acc = cfg.readout == Readout::accumulated;
      record_step(s1, t, i, acc ? session.accumulated() : inst, labels);
      s1.spikes_per_sample[t] += static_cast<double>(session.spike_events());

      if (L == 0) {
        record_step(s2, t, i, acc ? session.accumulated() : inst, labels);
        continue;
      }
      const std::size_t steps = t + 1;
      const double elapsed = static_cast<double>(steps);
      std::vector<double> events(L, 0.0);
      // Layer 1: ideal counts from the recorded stage-1 charge.
      const LayerState& first = session.state().layers[0];
      Tensor signal({snn.layers[0].size});
      for (std::size_t k = 0; k < signal.size(); ++k) {
        const int c = ideal_count(first.charge[k], snn.layers[0].th, steps);
        events[0] += c;
        signal[k] = c * snn.layers[0].th;
      }
      // Deeper layers: charge rebuilt from corrected upstream counts.
      for (std::size_t l = 1; l < L; ++l) {
        Tensor charge = apply_chain(snn.layers[l].synapse, signal, false);
        Tensor next({snn.layers[l].size});
        for (std::size_t k = 0; k < next.size(); ++k) {
          const int c = ideal_count(charge[k] + elapsed * layer_bias[l][k], snn.layers[l].th, steps);
          events[l] += c;
          next[k] = c * snn.layers[l].th;
        }
        signal = std::move(next);
      }
      Tensor logits = apply_chain(snn.head, signal, false);
      for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += elapsed * head_bias[k];
      if (acc) {
        record_step(s2, t, i, logits.data(), labels);
      } else {
        std::vector<double> step_drive(logits.size());
        for (std::size_t k = 0; k < logits.size(); ++k) step_drive[k] = logits[k] - prev[k];
        record_step(s2, t, i, step_drive, labels);
      }
      std::copy(logits.data().begin(), logits.data().end(), prev.begin());
      for (std::size_t l = 0; l < L; ++l) {
        s2.spikes_per_sample[t] += events[l];
        if (t + 1 == cfg.T) s2.layer_spikes[l] += events[l];
      }
    }
    for (std::size_t l = 0; l < L; ++l) {
      s1.residuals[l] = std::max(s1.residuals[l], session.residual(l));
      for (int e : session.state().layers[l].events) s1.layer_spikes[l] += e;
    }
  }
  s2.residuals = s1.residuals;
  if (cfg.record_trace) s1.trace = session.trace();
  finish(s1);
  finish(s2);
  return out;
}

double conservation_audit(std::span<const TraceRow> rows, std::size_t layer, double th) {
  struct Acc {
    double u0 = 0.0, uT = 0.0, charge = 0.0, spikes = 0.0;
    int zT = 0;
    std::size_t tmax = 0;
    bool seen0 = false;
  };
  std::vector<Acc> acc;
  for (const TraceRow& r : rows) {
    if (r.layer != layer) continue;
    if (r.neuron >= acc.size()) acc.resize(r.neuron + 1);
    Acc& a = acc[r.neuron];
    if (r.t == 0) {
      a.u0 = r.u;
      a.seen0 = true;
      continue;
    }
    a.charge += r.input_current;
    a.spikes += r.z;
    if (r.t >= a.tmax) {
      a.tmax = r.t;
      a.uT = r.u;
      a.zT = r.z;
    }
  }
  double worst = 0.0;
  for (const Acc& a : acc) {
    if (!a.seen0) throw ConfigError("trace lacks the t = 0 pre-charge rows");
    // The last step's spike has not been reset-subtracted yet.
    const double r = a.uT - a.u0 - a.charge + th * (a.spikes - a.zT);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Single neuron

NeuronTrace simulate_neuron(std::span<const double> currents, double th, Correction correction, double precharge) {
  NeuronTrace tr;
  double u = precharge * th;
  int z_prev = 0, count = 0;
  const bool negative = correction == Correction::negative_spikes;
  double charge = 0.0;
  for (double c : currents) {
    const int z = if_update(u, c, z_prev, th, negative, count);
    count += z;
    charge += c;
    z_prev = z;
    tr.u.push_back(u);
    tr.z.push_back(z);
  }
  tr.count = count;
  if (correction == Correction::two_stage_offset) tr.count = ideal_count(charge, th, currents.size());
  return tr;
}

UnevennessReport unevenness_demo(std::vector<double> schedule, double th) {
  UnevennessReport rep;
  rep.schedule = std::move(schedule);
  rep.th = th;
  rep.plain = simulate_neuron(rep.schedule, th, Correction::none);
  rep.negative = simulate_neuron(rep.schedule, th, Correction::negative_spikes);
  rep.two_stage_count = simulate_neuron(rep.schedule, th, Correction::two_stage_offset).count;
  double total = 0.0;
  for (double c : rep.schedule) total += c;
  rep.ann_state = ideal_count(total, th, rep.schedule.size());

  std::ostringstream os;
  char buf[128];
  os << "unevenness demo: th=" << th << ", u0=" << 0.5 * th << ", schedule=(";
  for (std::size_t i = 0; i < rep.schedule.size(); ++i) os << (i ? ", " : "") << rep.schedule[i];
  os << ")\n";
  os << " t   current   u(plain)  z(plain)   u(neg)  z(neg)\n";
  for (std::size_t t = 0; t < rep.schedule.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%2zu %9.3f %10.3f %9d %8.3f %7d\n", t + 1, rep.schedule[t], rep.plain.u[t],
                  rep.plain.z[t], rep.negative.u[t], rep.negative.z[t]);
    os << buf;
  }
  os << "ANN state (total drive " << total << "): " << rep.ann_state << "\n";
  os << "SNN count, plain:            " << rep.plain.count << (rep.plain.count != rep.ann_state ? "  (spurious)" : "")
     << "\n";
  os << "SNN count, negative spikes:  " << rep.negative.count << "\n";
  os << "SNN count, two-stage offset: " << rep.two_stage_count << "\n";
  rep.text = os.str();
  return rep;
}

}  // namespace qsnn
