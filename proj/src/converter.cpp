#include "qsnn/converter.hpp"

#include "qsnn/detail/overloaded.hpp"
#include "qsnn/error.hpp"

namespace qsnn {

using detail::overloaded;
using json = nlohmann::json;

Tensor apply_chain(const std::vector<LinearOp>& chain, const Tensor& x, bool with_bias) {
  Tensor h = x;
  for (const LinearOp& op : chain)
    h = std::visit(overloaded{[&](const AffineOp& a) { return with_bias ? affine_apply(a.W, a.B, h) : linear_apply(a.W, h); },
                              [&](const PoolOp& p) { return p.pool.apply(h); }},
                   op);
  return h;
}

std::size_t chain_out_features(const std::vector<LinearOp>& chain, std::size_t in) {
  std::size_t n = in;
  for (const LinearOp& op : chain)
    n = std::visit(overloaded{[](const AffineOp& a) { return a.W.dim(0); },
                              [](const PoolOp& p) { return p.pool.out_features(); }},
                   op);
  return n;
}

SnnNet convert(const QuantNet& net) {
  SnnNet snn;
  snn.inputs = net.input_features();
  snn.classes = net.num_classes();
  std::vector<LinearOp> pending;
  std::size_t width = snn.inputs;
  for (std::size_t i = 0; i < net.blocks().size(); ++i) {
    const Block& b = net.blocks()[i];
    if (auto* a = std::get_if<AffineLayer>(&b)) {
      pending.emplace_back(AffineOp{a->W(), a->B()});
      width = a->out_features();
    } else if (auto* p = std::get_if<PoolBlock>(&b)) {
      pending.emplace_back(PoolOp{*p});
      width = p->out_features();
    } else if (auto* q = std::get_if<QuantActLayer>(&b)) {
      if (!q->scale_initialized())
        throw ConversionError("block " + std::to_string(i) + " (quant) has no trained scale");
      if (pending.empty())
        throw ConversionError("block " + std::to_string(i) + " (quant) is not preceded by a linear block");
      SnnLayer layer;
      layer.synapse = std::move(pending);
      pending.clear();
      layer.p = q->p();
      layer.s = q->scale();
      layer.th = static_cast<double>(q->p()) * q->scale();
      layer.source_block = i;
      layer.size = width;
      snn.layers.push_back(std::move(layer));
    } else {
      throw ConversionError("block " + std::to_string(i) + " (" + block_name(b) +
                            ") is not a quantized activation and cannot be converted to spiking neurons");
    }
  }
  snn.head = std::move(pending);
  return snn;
}

void reset_state(const SnnNet& snn, SnnState& state) {
  state.layers.resize(snn.layers.size());
  for (std::size_t l = 0; l < snn.layers.size(); ++l) {
    const SnnLayer& layer = snn.layers[l];
    LayerState& ls = state.layers[l];
    ls.u.assign(layer.size, snn.precharge * layer.th);
    ls.u0 = ls.u;
    ls.charge.assign(layer.size, 0.0);
    ls.z_prev.assign(layer.size, 0);
    ls.count.assign(layer.size, 0);
    ls.events.assign(layer.size, 0);
  }
  state.head_acc.assign(snn.classes, 0.0);
  state.t = 0;
}

SnnState initial_state(const SnnNet& snn) {
  SnnState s;
  reset_state(snn, s);
  return s;
}

std::vector<AffineOp> affine_parameters(const SnnNet& snn) {
  std::vector<AffineOp> out;
  auto collect = [&](const std::vector<LinearOp>& chain) {
    for (const LinearOp& op : chain)
      if (auto* a = std::get_if<AffineOp>(&op)) out.push_back(*a);
  };
  for (const SnnLayer& l : snn.layers) collect(l.synapse);
  collect(snn.head);
  return out;
}

json snn_section(const SnnNet& snn) {
  json layers = json::array(), th = json::array();
  for (const SnnLayer& l : snn.layers) {
    layers.push_back({{"source_block", l.source_block}, {"th", l.th}, {"p", l.p}, {"s", l.s}, {"size", l.size}});
    th.push_back(l.th);
  }
  return {{"thresholds", th},
          {"precharge_fraction", snn.precharge},
          {"dt_ms", snn.dt_ms},
          {"input_coding", "analog"},
          {"output", "integrator"},
          {"layers", layers}};
}

void save_snn_checkpoint(const QuantNet& source, const SnnNet& snn, const std::filesystem::path& path,
                         const CheckpointMeta& meta) {
  json doc = checkpoint_to_json(source, meta);
  doc["snn"] = snn_section(snn);
  write_text_file(path, doc.dump(1) + "\n");
}

SnnNet snn_from_checkpoint(const Checkpoint& ckpt) {
  SnnNet snn = convert(ckpt.net);
  if (!ckpt.snn) return snn;
  const json& sec = *ckpt.snn;
  try {
    const auto th = sec.at("thresholds").get<std::vector<double>>();
    if (th.size() != snn.layers.size())
      throw ParseError("snn section lists " + std::to_string(th.size()) + " thresholds for " +
                           std::to_string(snn.layers.size()) + " layers",
                       0, "$.snn.thresholds");
    for (std::size_t l = 0; l < th.size(); ++l)
      if (th[l] != snn.layers[l].th)
        throw ParseError("snn threshold " + std::to_string(l) + " does not equal p·s of its source layer", 0,
                         "$.snn.thresholds[" + std::to_string(l) + "]");
    snn.precharge = sec.at("precharge_fraction").get<double>();
    snn.dt_ms = sec.value("dt_ms", 1.0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad snn section: ") + e.what(), 0, "$.snn");
  }
  return snn;
}

SnnNet load_snn_checkpoint(const std::filesystem::path& path) { return snn_from_checkpoint(load_checkpoint(path)); }

}  // namespace qsnn
