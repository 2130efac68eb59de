#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qsnn/dataset.hpp"
#include "qsnn/snn.hpp"
#include "qsnn/trainer.hpp"

namespace qsnn {

inline constexpr const char* kVersion = "0.1.0";

// Where samples come from. "auto" uses MNIST IDX files from `path` when all
// four are present and falls back to synthetic blobs otherwise.
struct DatasetSource {
  std::string kind = "auto";  // auto | idx | blobs | spirals
  std::string path = "data/mnist";
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  std::size_t dims = 784;     // synthetic blobs
  std::size_t classes = 10;   // synthetic only
  double spread = 0.25;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static DatasetSource from_json(const nlohmann::json& j);
};

// Also returns the resolved kind ("idx", "blobs" or "spirals").
DataSplits load_dataset(const DatasetSource& src, std::string* resolved_kind = nullptr);

struct ExperimentConfig {
  DatasetSource data;
  std::vector<std::size_t> hidden = {256};
  TrainConfig train;
  std::vector<int> p_list = {2};
  std::vector<std::size_t> T_list = {1, 2, 4, 8, 16, 32, 64};
  std::vector<Correction> corrections = {Correction::none};
  std::vector<bool> noise_variants = {false, true};
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path output_dir = "results";

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct ResultRow {
  std::uint64_t seed = 0;
  int p = 0;
  bool noise_adaptor = false;
  Correction correction = Correction::none;
  std::size_t T = 0;
  double ann_acc = 0.0;
  double snn_acc = 0.0;
  double spikes_per_sample = 0.0;
};

inline constexpr const char* kResultsHeader = "seed,p,noise_adaptor,correction,T,ann_acc,snn_acc,spikes_per_sample";

std::string results_csv(const std::vector<ResultRow>& rows);
// Throws ParseError naming the first missing column.
std::vector<ResultRow> parse_results_csv(std::string_view text);

struct CellFailure {
  std::uint64_t seed = 0;
  int p = 0;
  bool noise_adaptor = false;
  std::string stage;
  std::string message;
};

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  std::vector<CellFailure> failures;
  nlohmann::json manifest;
};

// For every (seed, p, noise variant): train → evaluate the ANN → convert →
// simulate to max(T_list) for every correction mode, then emit one row per
// T. A failing cell is recorded and the sweep continues. With `write_files`
// the results CSV (results.csv) and manifest (manifest.json) are written to
// cfg.output_dir.
ExperimentOutput run_experiment(const ExperimentConfig& cfg, bool write_files = true, std::ostream* log = nullptr);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace qsnn
