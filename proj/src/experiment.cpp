#include "qsnn/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <map>
#include <sstream>

#include "qsnn/checkpoint.hpp"
#include "qsnn/converter.hpp"
#include "qsnn/error.hpp"

namespace qsnn {

using json = nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Dataset source

json DatasetSource::to_json() const {
  return {{"kind", kind},         {"path", path},       {"n_train", n_train}, {"n_test", n_test},
          {"dims", dims},         {"classes", classes}, {"spread", spread},   {"seed", seed}};
}

DatasetSource DatasetSource::from_json(const json& j) {
  DatasetSource d;
  d.kind = j.value("kind", d.kind);
  d.path = j.value("path", d.path);
  d.n_train = j.value("n_train", d.n_train);
  d.n_test = j.value("n_test", d.n_test);
  d.dims = j.value("dims", d.dims);
  d.classes = j.value("classes", d.classes);
  d.spread = j.value("spread", d.spread);
  d.seed = j.value("seed", d.seed);
  return d;
}

DataSplits load_dataset(const DatasetSource& src, std::string* resolved_kind) {
  std::string kind = src.kind;
  if (kind == "auto") kind = has_mnist_dir(src.path) ? "idx" : "blobs";
  if (resolved_kind) *resolved_kind = kind;
  if (kind == "idx") return load_mnist_dir(src.path, src.n_train, src.n_test);
  if (kind != "blobs" && kind != "spirals")
    throw ConfigError("unknown dataset kind '" + kind + "' (expected auto, idx, blobs or spirals)");
  SyntheticSpec spec;
  spec.kind = parse_synthetic_kind(kind);
  spec.n = src.n_train + src.n_test;
  spec.classes = src.classes;
  spec.seed = src.seed;
  spec.dims = src.dims;
  spec.spread = src.spread;
  Dataset all = gen_synthetic(spec);
  return {all.slice(0, src.n_train), all.slice(src.n_train, spec.n)};
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  train.validate();
  if (p_list.empty()) throw ConfigError("p_list must not be empty");
  if (T_list.empty()) throw ConfigError("T_list must not be empty");
  if (corrections.empty()) throw ConfigError("corrections must not be empty");
  if (noise_variants.empty()) throw ConfigError("noise_variants must not be empty");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  for (int p : p_list)
    if (p < 1) throw ConfigError("every p must be >= 1");
  for (std::size_t T : T_list)
    if (T < 1) throw ConfigError("every T must be >= 1");
  if (data.n_train == 0 || data.n_test == 0) throw ConfigError("dataset splits must be nonempty");
  if (data.kind == "idx" && !has_mnist_dir(data.path))
    throw ConfigError("dataset path " + data.path + " has no MNIST IDX files");
}

json ExperimentConfig::to_json() const {
  json corr = json::array();
  for (Correction c : corrections) corr.push_back(to_string(c));
  return {{"data", data.to_json()},
          {"hidden", hidden},
          {"train",
           {{"epochs", train.epochs},
            {"batch_size", train.batch_size},
            {"lr_max", train.lr_max},
            {"lr_min", train.lr_min},
            {"weight_decay", train.weight_decay},
            {"momentum", train.momentum}}},
          {"p_list", p_list},
          {"T_list", T_list},
          {"corrections", corr},
          {"noise_variants", noise_variants},
          {"seeds", seeds},
          {"output_dir", output_dir.string()}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("data")) c.data = DatasetSource::from_json(j.at("data"));
    c.hidden = j.value("hidden", c.hidden);
    if (j.contains("train")) {
      const json& t = j.at("train");
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.lr_max = t.value("lr_max", c.train.lr_max);
      c.train.lr_min = t.value("lr_min", c.train.lr_min);
      c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
      c.train.momentum = t.value("momentum", c.train.momentum);
    }
    c.p_list = j.value("p_list", c.p_list);
    c.T_list = j.value("T_list", c.T_list);
    if (j.contains("corrections")) {
      c.corrections.clear();
      for (const auto& s : j.at("corrections")) c.corrections.push_back(parse_correction(s.get<std::string>()));
    }
    c.noise_variants = j.value("noise_variants", c.noise_variants);
    c.seeds = j.value("seeds", c.seeds);
    c.output_dir = j.value("output_dir", c.output_dir.string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Results CSV

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const ResultRow& r : rows) {
    out += std::to_string(r.seed) + "," + std::to_string(r.p) + "," + (r.noise_adaptor ? "1" : "0") + "," +
           to_string(r.correction) + "," + std::to_string(r.T) + "," + format_double(r.ann_acc) + "," +
           format_double(r.snn_acc) + "," + format_double(r.spikes_per_sample) + "\n";
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, std::size_t line, const std::string& column) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("line " + std::to_string(line) + ": bad number '" + s + "' in column " + column, line, column);
  return v;
}

}  // namespace

std::vector<ResultRow> parse_results_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("results CSV is empty", 0, "header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  const auto required = split_csv_line(kResultsHeader);
  for (const auto& name : required)
    if (!col.count(name)) throw ParseError("results CSV is missing column '" + name + "'", 0, name);

  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < header.size())
      throw ParseError("line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(header.size()),
                       lineno, "row");
    auto cell = [&](const char* name) { return cells[col.at(name)]; };
    ResultRow r;
    r.seed = static_cast<std::uint64_t>(parse_double(cell("seed"), lineno, "seed"));
    r.p = static_cast<int>(parse_double(cell("p"), lineno, "p"));
    r.noise_adaptor = cell("noise_adaptor") == "1" || cell("noise_adaptor") == "true";
    r.correction = parse_correction(cell("correction"));
    r.T = static_cast<std::size_t>(parse_double(cell("T"), lineno, "T"));
    r.ann_acc = parse_double(cell("ann_acc"), lineno, "ann_acc");
    r.snn_acc = parse_double(cell("snn_acc"), lineno, "snn_acc");
    r.spikes_per_sample = parse_double(cell("spikes_per_sample"), lineno, "spikes_per_sample");
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Sweep

ExperimentOutput run_experiment(const ExperimentConfig& cfg, bool write_files, std::ostream* log) {
  cfg.validate();
  std::string kind;
  const DataSplits data = load_dataset(cfg.data, &kind);
  const std::size_t T_max = *std::max_element(cfg.T_list.begin(), cfg.T_list.end());

  std::vector<std::size_t> widths{data.train.dims()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(data.train.num_classes);

  ExperimentOutput out;
  json cells = json::array();
  for (std::uint64_t seed : cfg.seeds)
    for (int p : cfg.p_list)
      for (bool noise : cfg.noise_variants) {
        std::string stage = "train";
        try {
          TrainConfig tc = cfg.train;
          tc.seed = seed;
          tc.p = p;
          tc.noise_adaptor = noise;
          QuantNet net = QuantNet::mlp(widths, p, noise, Rng::derive(seed, 1));
          train(net, data.train, tc, &data.test);
          stage = "evaluate";
          const double ann = evaluate_ann(net, data.test);
          stage = "convert";
          const SnnNet snn = convert(net);
          for (Correction corr : cfg.corrections) {
            stage = "simulate:" + to_string(corr);
            SimConfig sc;
            sc.T = T_max;
            sc.correction = corr;
            const SimResult sim = simulate(snn, data.test.features, data.test.labels, sc);
            double worst = 0.0;
            for (double r : sim.residuals) worst = std::max(worst, r);
            for (std::size_t T : cfg.T_list)
              out.rows.push_back({seed, p, noise, corr, T, ann, sim.accuracy[T - 1], sim.spikes_per_sample[T - 1]});
            cells.push_back({{"seed", seed},
                             {"p", p},
                             {"noise_adaptor", noise},
                             {"correction", to_string(corr)},
                             {"config_hash", config_hash(tc)},
                             {"max_conservation_residual", worst}});
          }
          if (log)
            *log << "seed=" << seed << " p=" << p << " noise_adaptor=" << noise << " ann_acc=" << format_double(ann)
                 << "\n";
        } catch (const std::exception& e) {
          out.failures.push_back({seed, p, noise, stage, e.what()});
          if (log) *log << "cell seed=" << seed << " p=" << p << " noise_adaptor=" << noise << " failed at " << stage
                        << ": " << e.what() << "\n";
        }
      }

  json failures = json::array();
  for (const CellFailure& f : out.failures)
    failures.push_back({{"seed", f.seed}, {"p", f.p}, {"noise_adaptor", f.noise_adaptor}, {"stage", f.stage},
                        {"message", f.message}});
  const json cfg_json = cfg.to_json();
  out.manifest = {{"qsnn_version", kVersion},
                  {"checkpoint_format_version", kCheckpointVersion},
                  {"config", cfg_json},
                  {"config_hash", fnv1a_hex(cfg_json.dump())},
                  {"dataset_kind", kind},
                  {"seeds", cfg.seeds},
                  {"cells", cells},
                  {"failures", failures},
                  {"results_columns", kResultsHeader},
                  {"timestamp", static_cast<std::int64_t>(std::time(nullptr))}};

  if (write_files) {
    std::filesystem::create_directories(cfg.output_dir);
    write_text_file(cfg.output_dir / "results.csv", results_csv(out.rows));
    write_text_file(cfg.output_dir / "manifest.json", out.manifest.dump(2) + "\n");
  }
  return out;
}

}  // namespace qsnn
