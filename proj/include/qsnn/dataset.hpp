#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qsnn/tensor.hpp"

namespace qsnn {

// Labeled samples: features is (samples × dims) with values in [0, 1].
struct Dataset {
  Tensor features;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dims() const { return features.row_size(); }

  // Throws ConfigError when the invariants do not hold.
  void validate() const;
  // Rows [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;
  Dataset gather(std::span<const std::size_t> indices) const;
};

struct DataSplits {
  Dataset train;
  Dataset test;
};

// Raw IDX array: big-endian header, unsigned-byte payload.
struct IdxArray {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> data;
};

IdxArray parse_idx(std::span<const std::uint8_t> bytes);
IdxArray load_idx(const std::filesystem::path& path);

// Images file (magic 0x00000803) plus labels file (magic 0x00000801). Pixels
// are scaled by 1/255. `limit` keeps only the first samples when nonzero.
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t limit = 0);

// Standard MNIST file names inside `dir`; throws when they are missing.
DataSplits load_mnist_dir(const std::filesystem::path& dir, std::size_t train_limit = 0, std::size_t test_limit = 0);
bool has_mnist_dir(const std::filesystem::path& dir);

enum class SyntheticKind { blobs, spirals };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::blobs;
  std::size_t n = 1000;
  std::size_t classes = 2;
  std::uint64_t seed = 0;
  std::size_t dims = 2;   // blobs only; spirals are always 2-D
  double spread = 0.05;   // blob std-dev / spiral jitter
};

// Deterministic labeled point clouds, classes balanced by construction
// (sample i has label i mod classes before the final shuffle).
Dataset gen_synthetic(const SyntheticSpec& spec);

SyntheticKind parse_synthetic_kind(const std::string& name);

}  // namespace qsnn
