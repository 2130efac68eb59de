#include "qsnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "qsnn/error.hpp"
#include "qsnn/rng.hpp"

namespace qsnn {

void Dataset::validate() const {
  if (features.rank() != 2) throw ConfigError("dataset features must be samples × dims");
  if (features.rows() != labels.size())
    throw ConfigError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                      std::to_string(labels.size()) + " labels");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= num_classes)
      throw ConfigError("label " + std::to_string(labels[i]) + " at sample " + std::to_string(i) +
                        " is not below class count " + std::to_string(num_classes));
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, size());
  std::vector<std::size_t> idx(end > begin ? end - begin : 0);
  std::iota(idx.begin(), idx.end(), begin);
  return gather(idx);
}

Dataset Dataset::gather(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ConfigError("cannot build an empty dataset");
  const std::size_t d = dims();
  Dataset out{Tensor({indices.size(), d}), {}, num_classes};
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// IDX

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  auto be32 = [&](std::size_t off, const char* field) -> std::uint32_t {
    if (off + 4 > bytes.size())
      throw ParseError("IDX header truncated: need 4 bytes for " + std::string(field) + " at offset " +
                           std::to_string(off) + ", file has " + std::to_string(bytes.size()),
                       off, field);
    return (std::uint32_t{bytes[off]} << 24) | (std::uint32_t{bytes[off + 1]} << 16) |
           (std::uint32_t{bytes[off + 2]} << 8) | std::uint32_t{bytes[off + 3]};
  };
  const std::uint32_t magic = be32(0, "magic");
  if ((magic >> 8) != 0x08 || (magic & 0xff) == 0)
    throw ParseError("bad IDX magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08x", magic);
      return std::string(buf);
    }() + " (expected unsigned-byte type 0x08)", 0, "magic");
  IdxArray out;
  const std::size_t rank = magic & 0xff;
  std::size_t expected = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t d = be32(4 + 4 * i, "dims");
    if (d == 0) throw ParseError("IDX dimension " + std::to_string(i) + " is zero", 4 + 4 * i, "dims");
    out.dims.push_back(d);
    expected *= d;
  }
  const std::size_t header = 4 + 4 * rank;
  const std::size_t actual = bytes.size() - header;
  if (actual < expected)
    throw ParseError("IDX payload truncated: expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(actual),
                     bytes.size(), "payload");
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                  bytes.begin() + static_cast<std::ptrdiff_t>(header + expected));
  return out;
}

IdxArray load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open IDX file " + path.string(), 0);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t limit) {
  IdxArray img = load_idx(images);
  IdxArray lab = load_idx(labels);
  if (img.dims.size() != 3) throw ParseError(images.string() + ": images file must be rank 3 (magic 0x00000803)", 3, "magic");
  if (lab.dims.size() != 1) throw ParseError(labels.string() + ": labels file must be rank 1 (magic 0x00000801)", 3, "magic");
  if (img.dims[0] != lab.dims[0])
    throw ParseError("images file has " + std::to_string(img.dims[0]) + " samples, labels file " +
                         std::to_string(lab.dims[0]),
                     4, "dims");
  std::size_t n = img.dims[0];
  if (limit && limit < n) n = limit;
  const std::size_t d = img.dims[1] * img.dims[2];
  Dataset out{Tensor({n, d}), {}, 0};
  for (std::size_t i = 0; i < n * d; ++i) out.features[i] = img.data[i] / 255.0;
  out.labels.assign(lab.data.begin(), lab.data.begin() + static_cast<std::ptrdiff_t>(n));
  out.num_classes = 1 + *std::max_element(out.labels.begin(), out.labels.end());
  out.validate();
  return out;
}

static const char* kMnist[4] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                                "t10k-labels-idx1-ubyte"};

bool has_mnist_dir(const std::filesystem::path& dir) {
  return std::all_of(std::begin(kMnist), std::end(kMnist),
                     [&](const char* f) { return std::filesystem::exists(dir / f); });
}

DataSplits load_mnist_dir(const std::filesystem::path& dir, std::size_t train_limit, std::size_t test_limit) {
  if (!has_mnist_dir(dir)) throw ConfigError("no MNIST IDX files in " + dir.string());
  DataSplits out{load_idx_dataset(dir / kMnist[0], dir / kMnist[1], train_limit),
                 load_idx_dataset(dir / kMnist[2], dir / kMnist[3], test_limit)};
  // A short subset may miss a digit; both splits share the ten MNIST classes.
  out.train.num_classes = out.test.num_classes = std::max<std::size_t>({10, out.train.num_classes, out.test.num_classes});
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "blobs") return SyntheticKind::blobs;
  if (name == "spirals") return SyntheticKind::spirals;
  throw ConfigError("unknown synthetic dataset kind '" + name + "' (expected blobs or spirals)");
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 1) throw ConfigError("synthetic dataset needs at least one class");
  if (spec.n < spec.classes) throw ConfigError("synthetic dataset needs n >= classes");
  Rng rng(spec.seed);
  const std::size_t d = spec.kind == SyntheticKind::spirals ? 2 : spec.dims;
  if (d == 0) throw ConfigError("synthetic dataset needs dims >= 1");
  Tensor x({spec.n, d});
  std::vector<std::size_t> y(spec.n);

  if (spec.kind == SyntheticKind::blobs) {
    std::vector<double> centers(spec.classes * d);
    for (double& c : centers) c = rng.uniform(0.2, 0.8);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const std::size_t k = i % spec.classes;
      y[i] = k;
      for (std::size_t j = 0; j < d; ++j)
        x.at(i, j) = std::clamp(centers[k * d + j] + spec.spread * rng.normal(), 0.0, 1.0);
    }
  } else {
    // Interleaved Archimedean arms, one per class, scaled into [0, 1]².
    const std::size_t per = (spec.n + spec.classes - 1) / spec.classes;
    for (std::size_t i = 0; i < spec.n; ++i) {
      const std::size_t k = i % spec.classes;
      const double t = static_cast<double>(i / spec.classes) / static_cast<double>(per);
      const double r = 0.05 + 0.4 * t;
      const double a = 3.0 * std::numbers::pi * t + 2.0 * std::numbers::pi * static_cast<double>(k) /
                                                        static_cast<double>(spec.classes);
      y[i] = k;
      x.at(i, 0) = std::clamp(0.5 + r * std::cos(a) + spec.spread * rng.normal(), 0.0, 1.0);
      x.at(i, 1) = std::clamp(0.5 + r * std::sin(a) + spec.spread * rng.normal(), 0.0, 1.0);
    }
  }

  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  Dataset base{std::move(x), std::move(y), spec.classes};
  Dataset out = base.gather(order);
  out.validate();
  return out;
}

}  // namespace qsnn
