#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "qsnn/network.hpp"

namespace qsnn {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  bool noise_adaptor = false;
};

struct Checkpoint {
  QuantNet net;
  CheckpointMeta meta;
  // Present when the file was written from a converted network.
  std::optional<nlohmann::json> snn;
};

// JSON document: header (format, format_version, architecture, p, flags,
// seed), metadata, and parameter tensors as nested arrays. Doubles are
// written in shortest round-trip form, so reloading is bit-exact.
nlohmann::json checkpoint_to_json(const QuantNet& net, const CheckpointMeta& meta);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

std::string dump_checkpoint(const QuantNet& net, const CheckpointMeta& meta);
// Throws ParseError with a byte offset for malformed JSON and with a field
// path for structurally invalid documents.
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const QuantNet& net, const std::filesystem::path& path, const CheckpointMeta& meta = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace qsnn
