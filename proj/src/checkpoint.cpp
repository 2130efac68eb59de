#include "qsnn/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qsnn/detail/overloaded.hpp"
#include "qsnn/error.hpp"

namespace qsnn {

using json = nlohmann::json;
using detail::overloaded;

namespace {

json matrix_json(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    rows.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

json vector_json(const Tensor& t) { return json(t.values()); }

// Field access with a JSON-path-like name for diagnostics.
const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ParseError("expected an object at " + path, 0, path);
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing field " + path + "." + key, 0, path + "." + key);
  return *it;
}

template <class T>
T get_as(const json& v, const std::string& path) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ParseError("bad value at " + path + ": " + e.what(), 0, path);
  }
}

double finite_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError("expected a number at " + path, 0, path);
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError("non-finite number at " + path, 0, path);
  return d;
}

Tensor vector_from(const json& v, std::size_t n, const std::string& path) {
  if (!v.is_array() || v.size() != n)
    throw ParseError("expected an array of " + std::to_string(n) + " numbers at " + path, 0, path);
  Tensor t({n});
  for (std::size_t i = 0; i < n; ++i) t[i] = finite_number(v[i], path + "[" + std::to_string(i) + "]");
  return t;
}

Tensor matrix_from(const json& v, std::size_t rows, std::size_t cols, const std::string& path) {
  if (!v.is_array() || v.size() != rows)
    throw ParseError("expected " + std::to_string(rows) + " rows at " + path, 0, path);
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    Tensor row = vector_from(v[r], cols, path + "[" + std::to_string(r) + "]");
    std::copy(row.data().begin(), row.data().end(), t.row(r).begin());
  }
  return t;
}

std::optional<int> first_p(const QuantNet& net) {
  for (const Block& b : net.blocks())
    if (auto* q = std::get_if<QuantActLayer>(&b)) return q->p();
  return std::nullopt;
}

}  // namespace

json checkpoint_to_json(const QuantNet& net, const CheckpointMeta& meta) {
  json arch = json::array(), params = json::array();
  for (std::size_t i = 0; i < net.blocks().size(); ++i) {
    std::visit(overloaded{[&](const AffineLayer& a) {
                            arch.push_back({{"type", "affine"}, {"in", a.in_features()}, {"out", a.out_features()}});
                            params.push_back({{"block", i}, {"W", matrix_json(a.W())}, {"B", vector_json(a.B())}});
                          },
                          [&](const PoolBlock& p) {
                            arch.push_back({{"type", "avgpool"},
                                            {"channels", p.channels},
                                            {"height", p.height},
                                            {"width", p.width},
                                            {"window", {p.pool.window().h, p.pool.window().w}},
                                            {"stride", {p.pool.stride().h, p.pool.stride().w}}});
                          },
                          [&](const QuantActLayer& q) {
                            arch.push_back({{"type", "quant"}, {"p", q.p()}, {"noise_adaptor", q.noise_enabled()}});
                            json s = q.scale_initialized() ? json(q.scale()) : json(nullptr);
                            params.push_back({{"block", i}, {"s", s}});
                          },
                          [&](const ReluLayer&) { arch.push_back({{"type", "relu"}}); }},
               net.blocks()[i]);
  }
  const auto p = first_p(net);
  return {{"format", "qsnn-checkpoint"},
          {"format_version", kCheckpointVersion},
          {"architecture", arch},
          {"p", p ? json(*p) : json(nullptr)},
          {"flags", {{"noise_adaptor", meta.noise_adaptor}}},
          {"seed", meta.seed},
          {"metadata", {{"epoch", meta.epoch}, {"seed", meta.seed}, {"config_hash", meta.config_hash}}},
          {"parameters", params}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  if (get_as<std::string>(field(doc, "format", "$"), "$.format") != "qsnn-checkpoint")
    throw ParseError("not a qsnn checkpoint", 0, "$.format");
  const int version = get_as<int>(field(doc, "format_version", "$"), "$.format_version");
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint format_version " + std::to_string(version), 0, "$.format_version");

  const json& arch = field(doc, "architecture", "$");
  if (!arch.is_array()) throw ParseError("architecture must be an array", 0, "$.architecture");
  const json& params = field(doc, "parameters", "$");
  if (!params.is_array()) throw ParseError("parameters must be an array", 0, "$.parameters");

  // Parameter entries keyed by block index.
  std::map<std::size_t, const json*> by_block;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string path = "$.parameters[" + std::to_string(k) + "]";
    by_block[get_as<std::size_t>(field(params[k], "block", path), path + ".block")] = &params[k];
  }
  auto params_for = [&](std::size_t i) -> const json& {
    auto it = by_block.find(i);
    if (it == by_block.end())
      throw ParseError("no parameters for block " + std::to_string(i), 0, "$.parameters");
    return *it->second;
  };

  std::vector<Block> blocks;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const std::string path = "$.architecture[" + std::to_string(i) + "]";
    const std::string type = get_as<std::string>(field(arch[i], "type", path), path + ".type");
    if (type == "affine") {
      const auto in = get_as<std::size_t>(field(arch[i], "in", path), path + ".in");
      const auto out = get_as<std::size_t>(field(arch[i], "out", path), path + ".out");
      const json& pj = params_for(i);
      const std::string pp = "$.parameters{block=" + std::to_string(i) + "}";
      blocks.emplace_back(AffineLayer(matrix_from(field(pj, "W", pp), out, in, pp + ".W"),
                                      vector_from(field(pj, "B", pp), out, pp + ".B")));
    } else if (type == "quant") {
      const int p = get_as<int>(field(arch[i], "p", path), path + ".p");
      if (p < 1) throw ParseError("quant p must be >= 1", 0, path + ".p");
      const bool noise = get_as<bool>(field(arch[i], "noise_adaptor", path), path + ".noise_adaptor");
      const json& s = field(params_for(i), "s", "$.parameters{block=" + std::to_string(i) + "}");
      std::optional<double> scale;
      if (!s.is_null()) {
        scale = finite_number(s, path + ".s");
        if (!(*scale > 0.0)) throw ParseError("quant scale must be positive", 0, path + ".s");
      }
      blocks.emplace_back(QuantActLayer(p, noise, scale));
    } else if (type == "avgpool") {
      PoolBlock pb;
      pb.channels = get_as<std::size_t>(field(arch[i], "channels", path), path + ".channels");
      pb.height = get_as<std::size_t>(field(arch[i], "height", path), path + ".height");
      pb.width = get_as<std::size_t>(field(arch[i], "width", path), path + ".width");
      auto win = get_as<std::vector<std::size_t>>(field(arch[i], "window", path), path + ".window");
      auto str = get_as<std::vector<std::size_t>>(field(arch[i], "stride", path), path + ".stride");
      if (win.size() != 2 || str.size() != 2) throw ParseError("window/stride need two entries", 0, path);
      pb.pool = AvgPoolLayer({win[0], win[1]}, {str[0], str[1]});
      blocks.emplace_back(std::move(pb));
    } else if (type == "relu") {
      blocks.emplace_back(ReluLayer{});
    } else {
      throw ParseError("unknown block type '" + type + "'", 0, path + ".type");
    }
  }

  Checkpoint out;
  try {
    out.net = QuantNet(std::move(blocks));
  } catch (const Error& e) {
    throw ParseError(std::string("inconsistent architecture: ") + e.what(), 0, "$.architecture");
  }
  const json& meta = field(doc, "metadata", "$");
  out.meta.epoch = get_as<std::size_t>(field(meta, "epoch", "$.metadata"), "$.metadata.epoch");
  out.meta.seed = get_as<std::uint64_t>(field(meta, "seed", "$.metadata"), "$.metadata.seed");
  out.meta.config_hash = get_as<std::string>(field(meta, "config_hash", "$.metadata"), "$.metadata.config_hash");
  out.meta.noise_adaptor =
      get_as<bool>(field(field(doc, "flags", "$"), "noise_adaptor", "$.flags"), "$.flags.noise_adaptor");
  if (auto it = doc.find("snn"); it != doc.end()) out.snn = *it;
  return out;
}

std::string dump_checkpoint(const QuantNet& net, const CheckpointMeta& meta) {
  return checkpoint_to_json(net, meta).dump(1) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed checkpoint JSON: ") + e.what(), e.byte, "");
  }
  return checkpoint_from_json(doc);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const QuantNet& net, const std::filesystem::path& path, const CheckpointMeta& meta) {
  write_text_file(path, dump_checkpoint(net, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_text_file(path)); }

}  // namespace qsnn
