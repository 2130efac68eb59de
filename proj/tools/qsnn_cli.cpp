#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qsnn/checkpoint.hpp"
#include "qsnn/converter.hpp"
#include "qsnn/error.hpp"
#include "qsnn/experiment.hpp"
#include "qsnn/report.hpp"
#include "qsnn/selftest.hpp"
#include "qsnn/snn.hpp"
#include "qsnn/trainer.hpp"

using namespace qsnn;

namespace {

// Dataset and training knobs shared by train / simulate. A JSON config is
// read first; explicit flags override it.
struct CommonOpts {
  std::string config;
  std::optional<std::string> data_kind, data_path;
  std::optional<std::size_t> n_train, n_test;
  std::optional<std::uint64_t> data_seed;

  void add_data(CLI::App* app) {
    app->add_option("--config", config, "experiment config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--data", data_kind, "dataset kind: auto, idx, blobs or spirals");
    app->add_option("--data-path", data_path, "directory holding MNIST IDX files");
    app->add_option("--n-train", n_train, "training samples");
    app->add_option("--n-test", n_test, "test samples");
    app->add_option("--data-seed", data_seed, "seed of the synthetic dataset");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : ExperimentConfig::load(config);
    if (data_kind) cfg.data.kind = *data_kind;
    if (data_path) cfg.data.path = *data_path;
    if (n_train) cfg.data.n_train = *n_train;
    if (n_test) cfg.data.n_test = *n_test;
    if (data_seed) cfg.data.seed = *data_seed;
    return cfg;
  }
};

std::vector<std::size_t> report_steps(std::size_t T) {
  std::vector<std::size_t> steps;
  for (std::size_t t = 1; t < T; t *= 2) steps.push_back(t);
  steps.push_back(T);
  return steps;
}

int cmd_train(const CommonOpts& common, std::optional<int> p, bool noise, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> epochs, const std::string& out) {
  ExperimentConfig cfg = common.resolve();
  TrainConfig tc = cfg.train;
  tc.p = p.value_or(cfg.p_list.front());
  tc.noise_adaptor = noise;
  tc.seed = seed.value_or(cfg.seeds.front());
  if (epochs) tc.epochs = *epochs;

  std::string kind;
  const DataSplits data = load_dataset(cfg.data, &kind);
  std::vector<std::size_t> widths{data.train.dims()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(data.train.num_classes);
  QuantNet net = QuantNet::mlp(widths, tc.p, tc.noise_adaptor, Rng::derive(tc.seed, 1));
  const History hist = train(net, data.train, tc, &data.test);
  for (const EpochRecord& e : hist)
    std::printf("epoch %3zu  loss %.5f  test acc %.4f\n", e.epoch, e.train_loss, e.eval_accuracy);
  const double acc = evaluate_ann(net, data.test);
  std::printf("dataset %s  ann_acc %s\n", kind.c_str(), format_double(acc).c_str());
  save_checkpoint(net, out, {tc.epochs, tc.seed, config_hash(tc), tc.noise_adaptor});
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_convert(const std::string& in, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(in);
  const SnnNet snn = convert(ckpt.net);
  save_snn_checkpoint(ckpt.net, snn, out, ckpt.meta);
  std::printf("%zu spiking layers, thresholds:", snn.layers.size());
  for (const SnnLayer& l : snn.layers) std::printf(" %s", format_double(l.th).c_str());
  std::printf("\nwrote %s\n", out.c_str());
  return 0;
}

int cmd_simulate(const CommonOpts& common, const std::string& model, std::size_t T, const std::string& correction,
                 bool instantaneous, const std::string& trace_path, std::size_t trace_samples) {
  const ExperimentConfig cfg = common.resolve();
  const SnnNet snn = load_snn_checkpoint(model);
  const DataSplits data = load_dataset(cfg.data);

  SimConfig sc;
  sc.T = T;
  sc.correction = parse_correction(correction);
  sc.readout = instantaneous ? Readout::instantaneous : Readout::accumulated;
  const SimResult sim = simulate(snn, data.test.features, data.test.labels, sc);

  std::printf("%6s %10s %18s\n", "T", "snn_acc", "spikes_per_sample");
  for (std::size_t t : report_steps(T))
    std::printf("%6zu %10.4f %18.2f\n", t, sim.accuracy[t - 1], sim.spikes_per_sample[t - 1]);
  double worst = 0.0;
  for (double r : sim.residuals) worst = std::max(worst, r);
  std::printf("max conservation residual %.3e\n", worst);

  if (!trace_path.empty()) {
    if (sc.correction == Correction::two_stage_offset)
      throw ConfigError("membrane traces are not available in two-stage-offset mode");
    const std::size_t m = std::min(trace_samples, data.test.size());
    SimConfig tc = sc;
    tc.record_trace = true;
    const Dataset head = data.test.slice(0, m);
    const SimResult traced = simulate(snn, head.features, head.labels, tc);
    std::ofstream f(trace_path);
    if (!f) throw Error("cannot open " + trace_path + " for writing");
    write_trace_csv(f, traced.trace);
    std::printf("wrote %zu trace rows to %s\n", traced.trace.size(), trace_path.c_str());
  }
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::load(config);
  if (!out.empty()) cfg.output_dir = out;
  const ExperimentOutput res = run_experiment(cfg, true, &std::cerr);
  std::cout << pivot_text(pivot_results(res.rows));
  std::printf("wrote %s and %s\n", (cfg.output_dir / "results.csv").string().c_str(),
              (cfg.output_dir / "manifest.json").string().c_str());
  if (!res.failures.empty()) {
    std::fprintf(stderr, "%zu cell(s) failed\n", res.failures.size());
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& results, const std::string& csv_out) {
  const PivotTable table = pivot_results(parse_results_csv(read_text_file(results)));
  std::cout << pivot_text(table);
  if (!csv_out.empty()) write_text_file(csv_out, pivot_csv(table));
  return 0;
}

int cmd_demo(std::vector<double> schedule, double th) {
  const UnevennessReport r = unevenness_demo(std::move(schedule), th);
  std::cout << r.text;
  return 0;
}

int cmd_selftest() {
  bool all = true;
  for (const SelfCheck& c : run_selftest()) {
    std::printf("%s  %-22s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    all = all && c.pass;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized-ANN to spiking-network conversion harness"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOpts train_opts;
  std::optional<int> train_p;
  bool train_noise = false;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::size_t> train_epochs;
  std::string train_out = "model.json";
  auto* train_cmd = app.add_subcommand("train", "train a quantized MLP and write a checkpoint");
  train_opts.add_data(train_cmd);
  train_cmd->add_option("--p", train_p, "activation ceiling (quantization levels)")->check(CLI::PositiveNumber);
  train_cmd->add_flag("--noise-adaptor", train_noise, "train with uniform noise before rounding");
  train_cmd->add_option("--seed", train_seed, "training seed");
  train_cmd->add_option("--epochs", train_epochs, "number of epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("-o,--out", train_out, "checkpoint path");

  std::string conv_in, conv_out = "snn.json";
  auto* conv_cmd = app.add_subcommand("convert", "convert a trained checkpoint into a spiking network");
  conv_cmd->add_option("checkpoint", conv_in, "trained checkpoint")->required()->check(CLI::ExistingFile);
  conv_cmd->add_option("-o,--out", conv_out, "converted checkpoint path");

  CommonOpts sim_opts;
  std::string sim_model, sim_correction = "none", sim_trace;
  std::size_t sim_T = 64, sim_trace_samples = 1;
  bool sim_inst = false;
  auto* sim_cmd = app.add_subcommand("simulate", "run the spiking network on the test split");
  sim_opts.add_data(sim_cmd);
  sim_cmd->add_option("model", sim_model, "checkpoint (converted or not)")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("-T,--steps", sim_T, "simulation length")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--correction", sim_correction, "none, negative-spikes or two-stage-offset");
  sim_cmd->add_flag("--instantaneous", sim_inst, "classify from the last step's output only");
  sim_cmd->add_option("--trace", sim_trace, "write membrane traces to this CSV");
  sim_cmd->add_option("--trace-samples", sim_trace_samples, "samples to trace");

  std::string sweep_cfg, sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "train/convert/simulate every configured cell");
  sweep_cmd->add_option("config", sweep_cfg, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("-o,--out", sweep_out, "output directory (overrides the config)");

  std::string report_in, report_csv;
  auto* report_cmd = app.add_subcommand("report", "pivot a results CSV into an accuracy-vs-T table");
  report_cmd->add_option("results", report_in, "results.csv")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--csv", report_csv, "also write the table as CSV");

  std::vector<double> demo_schedule{2.0, -2.0};
  double demo_th = 1.0;
  auto* demo_cmd = app.add_subcommand("demo-unevenness", "single-neuron spike ordering demo");
  demo_cmd->add_option("--schedule", demo_schedule, "input current per step")->delimiter(',');
  demo_cmd->add_option("--th", demo_th, "threshold")->check(CLI::PositiveNumber);

  auto* self_cmd = app.add_subcommand("selftest", "run the internal invariant checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(train_opts, train_p, train_noise, train_seed, train_epochs, train_out);
    if (*conv_cmd) return cmd_convert(conv_in, conv_out);
    if (*sim_cmd) return cmd_simulate(sim_opts, sim_model, sim_T, sim_correction, sim_inst, sim_trace, sim_trace_samples);
    if (*sweep_cmd) return cmd_sweep(sweep_cfg, sweep_out);
    if (*report_cmd) return cmd_report(report_in, report_csv);
    if (*demo_cmd) return cmd_demo(demo_schedule, demo_th);
    if (*self_cmd) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
