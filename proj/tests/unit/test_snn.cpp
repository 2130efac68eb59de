#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qsnn/converter.hpp"
#include "qsnn/error.hpp"
#include "qsnn/snn.hpp"

using namespace qsnn;

namespace {

QuantNet random_net(std::vector<std::size_t> widths, int p, std::vector<double> scales, std::uint64_t seed) {
  QuantNet net = QuantNet::mlp(widths, p, false, seed);
  std::size_t k = 0;
  for (Block& b : net.blocks())
    if (auto* q = std::get_if<QuantActLayer>(&b)) q->set_scale(scales[k++]);
  return net;
}

Tensor random_inputs(std::size_t n, std::size_t d, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor x({n, d});
  for (double& v : x.data()) v = rng.uniform(lo, hi);
  return x;
}

// x=[1] → (0.6, 0.4) → quant(th 1) → [2, -2] → quant(th 1) → head.
// The second layer sees +2 then -2: the uneven schedule inside a network.
QuantNet uneven_net() {
  std::vector<Block> blocks;
  blocks.emplace_back(AffineLayer(Tensor::matrix({{0.6}, {0.4}}), Tensor::vector({0, 0})));
  blocks.emplace_back(QuantActLayer(2, false, 0.5));
  blocks.emplace_back(AffineLayer(Tensor::matrix({{2.0, -2.0}}), Tensor::vector({0})));
  blocks.emplace_back(QuantActLayer(2, false, 0.5));
  blocks.emplace_back(AffineLayer(Tensor::matrix({{1.0}, {-1.0}}), Tensor::vector({0, 0})));
  return QuantNet(std::move(blocks));
}

}  // namespace

// --- single neuron --------------------------------------------------------

TEST(Neuron, HalfThresholdCurrentFiresEveryOtherStep) {
  const double c[] = {0.5, 0.5, 0.5, 0.5};
  const NeuronTrace tr = simulate_neuron(c, 1.0, Correction::none);
  EXPECT_EQ(tr.z, (std::vector<int>{1, 0, 1, 0}));
  EXPECT_EQ(tr.count, 2);
}

TEST(Neuron, ZeroInputNeverFires) {
  const std::vector<double> c(50, 0.0);
  const NeuronTrace tr = simulate_neuron(c, 1.3, Correction::none);
  EXPECT_EQ(tr.count, 0);
  for (double u : tr.u) EXPECT_EQ(u, 0.65);
}

TEST(Neuron, SaturatingCurrentFiresEveryStep) {
  const std::vector<double> c(20, 1.0);
  const NeuronTrace tr = simulate_neuron(c, 1.0, Correction::none);
  EXPECT_EQ(tr.count, 20);
  const std::vector<double> big(20, 7.0);
  EXPECT_EQ(simulate_neuron(big, 1.0, Correction::none).count, 20);
}

TEST(Neuron, ThresholdEqualityFires) {
  double u = 0.5;
  EXPECT_EQ(if_update(u, 0.5, 0, 1.0, false, 0), 1);
  EXPECT_EQ(u, 1.0);
}

TEST(Neuron, ResetLagSubtractsPreviousSpike) {
  double u = 1.0;
  EXPECT_EQ(if_update(u, 0.2, 1, 1.0, false, 1), 0);
  EXPECT_DOUBLE_EQ(u, 0.2);
}

TEST(Neuron, ConstantCurrentMatchesCountFormula) {
  Rng rng(6);
  for (int k = 0; k < 2000; ++k) {
    const double th = rng.uniform(0.2, 3.0), c = rng.uniform(-0.5 * th, 1.5 * th);
    const std::size_t T = 1 + rng.below(40);
    const double q = (0.5 * th + T * c) / th;
    if (std::abs(q - std::round(q)) < 1e-9) continue;
    const std::vector<double> cur(T, c);
    EXPECT_EQ(simulate_neuron(cur, th, Correction::none).count, ideal_count(T * c, th, T)) << th << " " << c << " " << T;
  }
}

TEST(Unevenness, SpuriousSpikeAndCorrections) {
  const UnevennessReport r = unevenness_demo();
  EXPECT_EQ(r.plain.count, 1);
  EXPECT_EQ(r.plain.u[0], 2.5);
  EXPECT_LT(r.plain.u[1], 1.0);
  EXPECT_EQ(r.ann_state, 0);
  EXPECT_EQ(r.negative.count, 0);
  EXPECT_EQ(r.negative.z[1], -1);
  EXPECT_EQ(r.two_stage_count, 0);
  EXPECT_NE(r.text.find("spurious"), std::string::npos);
}

TEST(Unevenness, EvenScheduleHasNoError) {
  const UnevennessReport r = unevenness_demo({1.0, 1.0});
  EXPECT_EQ(r.plain.count, 2);
  EXPECT_EQ(r.ann_state, 2);
}

TEST(Unevenness, OrderMatters) {
  const UnevennessReport r = unevenness_demo({-1.0, 2.0});
  EXPECT_EQ(r.plain.count, 1);
  EXPECT_EQ(r.ann_state, 1);
}

TEST(NegativeSpikes, NeverFireUnderNonNegativeDrive) {
  Rng rng(3);
  std::vector<double> c(64);
  for (double& v : c) v = rng.uniform(0.0, 1.2);
  const NeuronTrace tr = simulate_neuron(c, 1.0, Correction::negative_spikes);
  for (int z : tr.z) EXPECT_GE(z, 0);
}

TEST(NegativeSpikes, CountNeverGoesNegative) {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> c(32);
    for (double& v : c) v = rng.uniform(-2.0, 2.0);
    const NeuronTrace tr = simulate_neuron(c, 1.0, Correction::negative_spikes);
    int running = 0;
    for (int z : tr.z) {
      running += z;
      ASSERT_GE(running, 0);
      ASSERT_LE(running, 32);
    }
  }
}

// --- sessions -------------------------------------------------------------

TEST(Session, StepBeforeBeginRejected) {
  const SnnNet snn = convert(random_net({3, 4, 2}, 2, {0.5}, 1));
  Session s(snn);
  EXPECT_THROW(s.step(), StateError);
  EXPECT_THROW(Session(snn, Correction::two_stage_offset), ConfigError);
  EXPECT_THROW(s.begin(Tensor::vector({1, 2})), ShapeError);
}

TEST(Session, ZeroInputZeroBiasLayerStaysAtPrecharge) {
  std::vector<Block> blocks;
  blocks.emplace_back(AffineLayer(3, 4));  // zero weights and bias
  blocks.emplace_back(QuantActLayer(2, false, 0.5));
  blocks.emplace_back(AffineLayer(4, 2));
  const SnnNet snn = convert(QuantNet(std::move(blocks)));
  Session s(snn);
  s.begin(Tensor::vector({0.3, 0.1, 0.9}));
  for (int t = 0; t < 30; ++t) s.step();
  for (double u : s.state().layers[0].u) EXPECT_EQ(u, 0.5);
  EXPECT_EQ(s.spike_events(), 0u);
  EXPECT_EQ(s.residual(0), 0.0);
}

TEST(Session, BeginResetsBetweenSamples) {
  const SnnNet snn = convert(random_net({3, 6, 2}, 2, {0.3}, 5));
  Session s(snn);
  s.begin(Tensor::vector({0.9, 0.9, 0.9}));
  for (int t = 0; t < 7; ++t) s.step();
  s.begin(Tensor::vector({0.1, 0.2, 0.3}));
  s.step();
  Session fresh(snn);
  fresh.begin(Tensor::vector({0.1, 0.2, 0.3}));
  fresh.step();
  EXPECT_EQ(s.accumulated(), fresh.accumulated());
  EXPECT_EQ(s.state().layers[0].u, fresh.state().layers[0].u);
}

// --- batch simulation -----------------------------------------------------

TEST(Simulate, DeterministicAcrossRuns) {
  const SnnNet snn = convert(random_net({5, 8, 6, 3}, 2, {0.2, 0.3}, 7));
  const Tensor x = random_inputs(20, 5, 1);
  SimConfig cfg;
  cfg.T = 12;
  const SimResult a = simulate(snn, x, {}, cfg), b = simulate(snn, x, {}, cfg);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.layer_spikes, b.layer_spikes);
  EXPECT_TRUE(a.accuracy.empty());
}

TEST(Simulate, RejectsBadInputs) {
  const SnnNet snn = convert(random_net({5, 8, 3}, 2, {0.2}, 7));
  SimConfig cfg;
  cfg.T = 0;
  EXPECT_THROW(simulate(snn, random_inputs(2, 5, 1), {}, cfg), ConfigError);
  cfg.T = 2;
  EXPECT_THROW(simulate(snn, random_inputs(2, 4, 1), {}, cfg), ShapeError);
  const std::size_t labels[] = {0};
  EXPECT_THROW(simulate(snn, random_inputs(2, 5, 1), labels, cfg), ShapeError);
}

TEST(Simulate, AccuracyIsAFraction) {
  const SnnNet snn = convert(random_net({5, 8, 3}, 2, {0.2}, 7));
  const Tensor x = random_inputs(10, 5, 2);
  std::vector<std::size_t> labels(10, 1);
  SimConfig cfg;
  cfg.T = 5;
  const SimResult r = simulate(snn, x, labels, cfg);
  ASSERT_EQ(r.accuracy.size(), 5u);
  for (std::size_t t = 0; t < 5; ++t) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < 10; ++i) hits += r.predictions[t][i] == 1;
    EXPECT_EQ(r.accuracy[t], hits / 10.0);
  }
}

TEST(Simulate, PEqualsOneMatchesAnnAtFirstStep) {
  QuantNet net = random_net({6, 10, 8, 4}, 1, {0.35, 0.5}, 13);
  const Tensor x = random_inputs(64, 6, 3);
  const SnnNet snn = convert(net);
  SimConfig cfg;
  cfg.T = 1;
  const SimResult r = simulate(snn, x, {}, cfg);
  const auto trace = net.forward_trace(x);
  const Tensor& ann = trace.back();
  for (std::size_t i = 0; i < ann.size(); ++i) EXPECT_EQ(r.logits[i], ann[i]);

  // Layerwise: z₁·th equals the quantized activation exactly.
  Session s(snn);
  for (std::size_t i = 0; i < 64; ++i) {
    s.begin(Tensor({6}, std::vector<double>(x.row(i).begin(), x.row(i).end())));
    s.step();
    EXPECT_EQ(s.layer_outputs()[0].values(), std::vector<double>(trace[1].row(i).begin(), trace[1].row(i).end()));
    EXPECT_EQ(s.layer_outputs()[1].values(), std::vector<double>(trace[3].row(i).begin(), trace[3].row(i).end()));
  }
}

TEST(Simulate, SingleLayerCountsEqualStatesAtTEqualsP) {
  for (int p = 1; p <= 4; ++p) {
    const std::size_t K = 500;
    const double s = 0.37;
    Tensor W({K, 1});
    for (std::size_t k = 0; k < K; ++k) W[k] = -0.5 + (p * s + 1.0) * static_cast<double>(k) / K;
    std::vector<Block> blocks;
    blocks.emplace_back(AffineLayer(W, Tensor({K})));
    blocks.emplace_back(QuantActLayer(p, false, s));
    blocks.emplace_back(AffineLayer(K, 1));
    const SnnNet snn = convert(QuantNet(std::move(blocks)));
    Session sess(snn);
    sess.begin(Tensor::vector({1.0}));
    for (int t = 0; t < p; ++t) sess.step();
    for (std::size_t k = 0; k < K; ++k) {
      const double y = W[k] / s;
      if (std::abs(y - std::floor(y) - 0.5) < 1e-9) continue;
      EXPECT_EQ(sess.state().layers[0].count[k], quant::state(y, p)) << "p=" << p << " v=" << W[k];
    }
  }
}

TEST(Simulate, SpikeCountsStayInRange) {
  const SnnNet snn = convert(random_net({5, 12, 9, 3}, 3, {0.1, 0.2}, 21));
  const Tensor x = random_inputs(8, 5, 4, -1.0, 1.0);
  for (Correction c : {Correction::none, Correction::negative_spikes}) {
    Session s(snn, c);
    for (std::size_t i = 0; i < 8; ++i) {
      s.begin(Tensor({5}, std::vector<double>(x.row(i).begin(), x.row(i).end())));
      for (int t = 0; t < 25; ++t) {
        s.step();
        for (const LayerState& ls : s.state().layers)
          for (int n : ls.count) {
            ASSERT_GE(n, 0);
            ASSERT_LE(n, t + 1);
          }
      }
    }
  }
}

TEST(Conservation, RandomLayerResidualIsTiny) {
  const SnnNet snn = convert(random_net({20, 100, 10}, 4, {0.05}, 8));
  const Tensor x = random_inputs(3, 20, 9, -1.0, 1.0);
  SimConfig cfg;
  cfg.T = 64;
  cfg.record_trace = true;
  const SimResult r = simulate(snn, x, {}, cfg);
  EXPECT_LE(r.residuals[0], 1e-9);
  for (std::size_t sample = 0; sample < 3; ++sample) {
    std::vector<TraceRow> rows;
    for (const TraceRow& t : r.trace)
      if (t.sample == sample) rows.push_back(t);
    EXPECT_LE(conservation_audit(rows, 0, snn.layers[0].th), 1e-9);
  }
}

TEST(Conservation, DeepNetsWithNegativeSpikes) {
  const SnnNet snn = convert(random_net({8, 30, 20, 4}, 2, {0.1, 0.15}, 9));
  const Tensor x = random_inputs(10, 8, 2, -1.0, 1.0);
  SimConfig cfg;
  cfg.T = 40;
  cfg.correction = Correction::negative_spikes;
  const SimResult r = simulate(snn, x, {}, cfg);
  for (double res : r.residuals) EXPECT_LE(res, 1e-9);
}

TEST(Conservation, AuditNeedsPrechargeRows) {
  std::vector<TraceRow> rows{{0, 0, 0, 1, 0.5, 0, 0.0}};
  EXPECT_THROW(conservation_audit(rows, 0, 1.0), ConfigError);
}

TEST(Readout, AccumulatedLogitsMatchPostHocSpikeTrains) {
  QuantNet net = random_net({5, 7, 3}, 2, {0.2}, 31);
  const SnnNet snn = convert(net);
  const Tensor x = random_inputs(4, 5, 6);
  SimConfig cfg;
  cfg.T = 16;
  cfg.record_trace = true;
  const SimResult r = simulate(snn, x, {}, cfg);
  const auto& head = std::get<AffineOp>(snn.head[0]);
  const double th = snn.layers[0].th;
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> counts(7, 0.0);
    for (std::size_t t = 1; t <= cfg.T; ++t) {
      for (const TraceRow& row : r.trace)
        if (row.sample == i && row.t == t) counts[row.neuron] += row.z;
      for (std::size_t c = 0; c < 3; ++c) {
        double post = t * head.B[c];
        for (std::size_t n = 0; n < 7; ++n) post += head.W.at(c, n) * counts[n] * th;
        EXPECT_NEAR(r.logits[((t - 1) * 4 + i) * 3 + c], post, 1e-9);
      }
    }
  }
}

TEST(Readout, InstantaneousUsesTheLastStepOnly) {
  const SnnNet snn = convert(random_net({5, 7, 3}, 2, {0.2}, 31));
  const Tensor x = random_inputs(4, 5, 6);
  SimConfig acc, inst;
  acc.T = inst.T = 6;
  inst.readout = Readout::instantaneous;
  const SimResult a = simulate(snn, x, {}, acc), b = simulate(snn, x, {}, inst);
  for (std::size_t i = 0; i < 4 * 3; ++i) EXPECT_EQ(a.logits[i], b.logits[i]);  // t = 1
  for (std::size_t k = 0; k < 4 * 3; ++k) {
    const double diff = a.logits[5 * 12 + k] - a.logits[4 * 12 + k];
    EXPECT_NEAR(b.logits[5 * 12 + k], diff, 1e-12);
  }
}

// --- two-stage offset -----------------------------------------------------

TEST(TwoStage, CorrectsTheUnevenNetwork) {
  const SnnNet snn = convert(uneven_net());
  ASSERT_EQ(snn.layers[0].th, 1.0);
  SimConfig cfg;
  cfg.T = 2;
  const TwoStageResult r = two_stage_offset(snn, Tensor::matrix({{1.0}}), {}, cfg);
  EXPECT_EQ(r.stage1.layer_spikes[1], 1.0);
  EXPECT_EQ(r.stage2.layer_spikes[1], 0.0);
  EXPECT_EQ(r.stage2.layer_spikes[0], 2.0);

  // The quantized ANN sees no activity in the second layer either.
  QuantNet net = uneven_net();
  const auto trace = net.forward_trace(Tensor::matrix({{1.0}}));
  EXPECT_EQ(trace[3][0], 0.0);

  Session neg(snn, Correction::negative_spikes);
  neg.begin(Tensor::vector({1.0}));
  neg.step();
  neg.step();
  EXPECT_EQ(neg.state().layers[1].count[0], 0);
}

TEST(TwoStage, SingleLayerIsAFixedPoint) {
  const SnnNet snn = convert(random_net({5, 9, 3}, 2, {0.25}, 17));
  const Tensor x = random_inputs(30, 5, 8);
  SimConfig cfg;
  cfg.T = 20;
  const TwoStageResult r = two_stage_offset(snn, x, {}, cfg);
  EXPECT_EQ(r.stage1.predictions, r.stage2.predictions);
  for (std::size_t i = 0; i < r.stage1.logits.size(); ++i) EXPECT_NEAR(r.stage1.logits[i], r.stage2.logits[i], 1e-9);
}

TEST(TwoStage, SimulateReportsBothStages) {
  const SnnNet snn = convert(random_net({5, 9, 7, 3}, 2, {0.25, 0.2}, 17));
  const Tensor x = random_inputs(30, 5, 8);
  std::vector<std::size_t> labels(30, 0);
  SimConfig cfg;
  cfg.T = 8;
  cfg.correction = Correction::two_stage_offset;
  const SimResult r = simulate(snn, x, labels, cfg);
  EXPECT_EQ(r.stage1_accuracy.size(), 8u);
  EXPECT_EQ(r.accuracy.size(), 8u);
}

TEST(Trace, CsvHeaderAndRows) {
  std::ostringstream os;
  const TraceRow rows[] = {{0, 1, 2, 3, 0.25, -1, 0.5}};
  write_trace_csv(os, rows);
  EXPECT_EQ(os.str(), "sample,layer,neuron,t,u,z,input_current\n0,1,2,3,0.25,-1,0.5\n");
}

TEST(Correction, NamesRoundTrip) {
  for (Correction c : {Correction::none, Correction::negative_spikes, Correction::two_stage_offset})
    EXPECT_EQ(parse_correction(to_string(c)), c);
  EXPECT_THROW(parse_correction("offset"), ConfigError);
}
