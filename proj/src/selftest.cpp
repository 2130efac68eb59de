#include "qsnn/selftest.hpp"

#include <cmath>
#include <cstdio>

#include "qsnn/converter.hpp"
#include "qsnn/network.hpp"
#include "qsnn/quant.hpp"
#include "qsnn/snn.hpp"

namespace qsnn {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

SelfCheck quant_grid() {
  std::size_t bad = 0, n = 0;
  for (int p = 1; p <= 4; ++p)
    for (int i = -100; i <= 100 * (p + 1); ++i) {
      const double y = i / 100.0;
      const double q = quant::state(y, p);
      const double lo = std::min(std::max(y, 0.0), static_cast<double>(p));
      if (q != std::floor(lo + 0.5)) ++bad;
      ++n;
    }
  return {"quantizer grid", bad == 0, std::to_string(n - bad) + "/" + std::to_string(n) + " points"};
}

SelfCheck noise_mean() {
  QuantActLayer q(2, true, 0.5);
  Rng rng(7);
  const std::size_t N = 20000;
  double worst = 0.0;
  for (double v : {-0.3, 0.1, 0.37, 0.62, 0.9, 1.4}) {
    Tensor x({N}, v);
    const double mean = q.na_forward(x, rng).sum() / static_cast<double>(N);
    worst = std::max(worst, std::abs(mean - q.expected_activation(Tensor::vector({v}))[0]));
  }
  const double tol = 4.0 * 0.5 * 0.5 / std::sqrt(static_cast<double>(N));
  return {"noise adaptor mean", worst <= tol, fmt("max deviation %.2e (tolerance %.2e)", worst, tol)};
}

SelfCheck micro_equivalence() {
  const std::size_t widths[] = {6, 5, 4, 3};
  QuantNet net = QuantNet::mlp(widths, 1, false, 11);
  for (Block& b : net.blocks())
    if (auto* q = std::get_if<QuantActLayer>(&b)) q->set_scale(0.4);
  Rng rng(3);
  Tensor x({32, 6}, 0.0);
  for (double& v : x.data()) v = rng.uniform(0.0, 1.0);
  const Tensor ann = net.forward(x, ForwardMode::deterministic);
  SimConfig cfg;
  cfg.T = 1;
  const SimResult sim = simulate(convert(net), x, {}, cfg);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < ann.size(); ++i) diff += ann[i] != sim.logits[i];
  return {"p=1 T=1 equivalence", diff == 0, std::to_string(diff) + " of " + std::to_string(ann.size()) + " logits differ"};
}

SelfCheck conservation() {
  const std::size_t widths[] = {5, 8, 3};
  QuantNet net = QuantNet::mlp(widths, 3, false, 5);
  for (Block& b : net.blocks())
    if (auto* q = std::get_if<QuantActLayer>(&b)) q->set_scale(0.3);
  Rng rng(9);
  Tensor x({4, 5}, 0.0);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  SimConfig cfg;
  cfg.T = 50;
  cfg.record_trace = true;
  const SnnNet snn = convert(net);
  const SimResult sim = simulate(snn, x, {}, cfg);
  double worst = 0.0;
  for (double r : sim.residuals) worst = std::max(worst, r);
  std::vector<TraceRow> first;
  for (const TraceRow& r : sim.trace)
    if (r.sample == 0) first.push_back(r);
  const double audited = conservation_audit(first, 0, snn.layers[0].th);
  const bool ok = worst <= 1e-9 && audited <= 1e-9;
  return {"charge conservation", ok, fmt("running %.2e, trace audit %.2e", worst, audited)};
}

SelfCheck unevenness() {
  const UnevennessReport r = unevenness_demo();
  const bool ok = r.plain.count == 1 && r.ann_state == 0 && r.negative.count == r.ann_state &&
                  r.two_stage_count == r.ann_state;
  return {"unevenness demo", ok,
          "plain " + std::to_string(r.plain.count) + ", negative spikes " + std::to_string(r.negative.count) +
              ", two-stage " + std::to_string(r.two_stage_count) + ", ANN " + std::to_string(r.ann_state)};
}

}  // namespace

std::vector<SelfCheck> run_selftest() {
  return {quant_grid(), noise_mean(), micro_equivalence(), conservation(), unevenness()};
}

}  // namespace qsnn
