#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string_view>

#include "rfsnn/network.hpp"
#include "rfsnn/training.hpp"

namespace rfsnn {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& section) {
  if (!j.is_object())
    throw ConfigError(section + ": expected a JSON object");
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& section) {
  require_object(j, section);
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(section + ": unknown key \"" + key + "\"");
  }
}

template <class V>
void read(const json& j, const char* key, V& out, const std::string& section) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_unsigned_v<V> && !std::is_same_v<V, bool>) {
      if (!it->is_number_unsigned())
        throw ConfigError(section + "." + key +
                          ": expected a non-negative integer");
    }
    out = it->get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

const char* layer_type_name(LayerKind k) {
  switch (k) {
    case LayerKind::RFConv: return "rf_conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Oscillator: return "oscillator";
    case LayerKind::RFDense: return "rf_dense";
  }
  return "?";
}

}  // namespace

json to_json(const DeviceParams& p) {
  return {{"alpha", p.alpha}, {"amp_A", p.amp_A}, {"Q", p.Q},
          {"I_th", p.I_th},   {"I_max", p.I_max}};
}

DeviceParams device_params_from_json(const json& j) {
  const std::string s = "device";
  reject_unknown(j, {"alpha", "amp_A", "Q", "I_th", "I_max"}, s);
  DeviceParams p;
  read(j, "alpha", p.alpha, s);
  read(j, "amp_A", p.amp_A, s);
  read(j, "Q", p.Q, s);
  read(j, "I_th", p.I_th, s);
  read(j, "I_max", p.I_max, s);
  p.validate();
  return p;
}

json to_json(const NetworkConfig& cfg) {
  json layers = json::array();
  for (const auto& l : cfg.layers) {
    json e{{"type", layer_type_name(l.kind)}};
    if (l.kind == LayerKind::RFConv) {
      e["filters"] = l.filters;
      e["kernel"] = l.kernel;
      e["stride"] = l.stride;
      e["padding"] = l.padding;
    } else if (l.kind == LayerKind::RFDense) {
      e["units"] = l.units;
    }
    layers.push_back(std::move(e));
  }
  return {
      {"input", {cfg.input_height, cfg.input_width, cfg.input_channels}},
      {"layers", std::move(layers)},
      {"device", to_json(cfg.device)},
      {"seed", cfg.seed},
      {"float_width", cfg.float_width},
      {"zeta_init", cfg.zeta_init == ZetaInit::Uniform ? "uniform" : "frequency"},
      {"zeta_range", cfg.zeta_range},
      {"emit_scale", cfg.emit_scale},
      {"logit_std", cfg.logit_std},
      {"synapse", cfg.synapse == SynapseModel::Resonator ? "resonator" : "linear"},
      {"neuron", cfg.neuron == NeuronModel::Oscillator ? "oscillator" : "relu"},
  };
}

NetworkConfig network_config_from_json(const json& j) {
  const std::string s = "network";
  reject_unknown(j,
                 {"input", "layers", "device", "seed", "float_width",
                  "zeta_init", "zeta_range", "emit_scale", "logit_std", "synapse", "neuron",
                  "preset"},
                 s);
  NetworkConfig cfg = NetworkConfig::full();
  if (j.contains("preset")) {
    std::string p;
    read(j, "preset", p, s);
    if (p == "full")
      cfg = NetworkConfig::full();
    else if (p == "desk")
      cfg = NetworkConfig::desk();
    else
      throw ConfigError(s + ".preset: expected \"full\" or \"desk\", got \"" +
                        p + "\"");
  }
  if (j.contains("input")) {
    std::vector<std::size_t> in;
    read(j, "input", in, s);
    if (in.size() != 3)
      throw ConfigError(s + ".input: expected [height, width, channels]");
    cfg.input_height = in[0];
    cfg.input_width = in[1];
    cfg.input_channels = in[2];
  }
  if (j.contains("layers")) {
    if (!j["layers"].is_array())
      throw ConfigError(s + ".layers: expected an array");
    cfg.layers.clear();
    for (std::size_t i = 0; i < j["layers"].size(); ++i) {
      const json& e = j["layers"][i];
      const std::string ls = s + ".layers[" + std::to_string(i) + "]";
      require_object(e, ls);
      std::string type;
      read(e, "type", type, ls);
      LayerSpec l;
      if (type == "rf_conv") {
        reject_unknown(e, {"type", "filters", "kernel", "stride", "padding"}, ls);
        l.kind = LayerKind::RFConv;
        read(e, "filters", l.filters, ls);
        read(e, "kernel", l.kernel, ls);
        read(e, "stride", l.stride, ls);
        read(e, "padding", l.padding, ls);
      } else if (type == "maxpool") {
        reject_unknown(e, {"type"}, ls);
        l.kind = LayerKind::MaxPool;
      } else if (type == "oscillator") {
        reject_unknown(e, {"type"}, ls);
        l.kind = LayerKind::Oscillator;
      } else if (type == "rf_dense") {
        reject_unknown(e, {"type", "units"}, ls);
        l.kind = LayerKind::RFDense;
        read(e, "units", l.units, ls);
      } else {
        throw ConfigError(ls + ".type: unknown layer type \"" + type + "\"");
      }
      cfg.layers.push_back(l);
    }
  }
  if (j.contains("device")) cfg.device = device_params_from_json(j["device"]);
  read(j, "seed", cfg.seed, s);
  read(j, "float_width", cfg.float_width, s);
  if (j.contains("zeta_init")) {
    std::string v;
    read(j, "zeta_init", v, s);
    if (v == "uniform")
      cfg.zeta_init = ZetaInit::Uniform;
    else if (v == "frequency")
      cfg.zeta_init = ZetaInit::Frequency;
    else
      throw ConfigError(s + ".zeta_init: expected \"uniform\" or \"frequency\"");
  }
  read(j, "zeta_range", cfg.zeta_range, s);
  read(j, "emit_scale", cfg.emit_scale, s);
  read(j, "logit_std", cfg.logit_std, s);
  if (j.contains("synapse")) {
    std::string v;
    read(j, "synapse", v, s);
    if (v == "resonator")
      cfg.synapse = SynapseModel::Resonator;
    else if (v == "linear")
      cfg.synapse = SynapseModel::Linear;
    else
      throw ConfigError(s + ".synapse: expected \"resonator\" or \"linear\"");
  }
  if (j.contains("neuron")) {
    std::string v;
    read(j, "neuron", v, s);
    if (v == "oscillator")
      cfg.neuron = NeuronModel::Oscillator;
    else if (v == "relu")
      cfg.neuron = NeuronModel::Relu;
    else
      throw ConfigError(s + ".neuron: expected \"oscillator\" or \"relu\"");
  }
  cfg.validate();
  return cfg;
}

Preset parse_preset(const std::string& s) {
  if (s == "full") return Preset::Full;
  if (s == "desk") return Preset::Desk;
  throw ConfigError("preset: expected \"full\" or \"desk\", got \"" + s + "\"");
}

std::string to_string(Preset p) { return p == Preset::Full ? "full" : "desk"; }

TrainConfig TrainConfig::for_preset(Preset p) {
  TrainConfig c;
  c.preset = p;
  if (p == Preset::Desk) {
    c.epochs = 1;
    c.train_limit = 10000;
  }
  return c;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr >= 0) || !std::isfinite(lr))
    throw ConfigError("train.lr must be finite and >= 0");
  if (threads == 0) throw ConfigError("train.threads must be >= 1");
}

json to_json(const TrainConfig& c) {
  return {{"preset", to_string(c.preset)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"seed", c.seed},
          {"train_limit", c.train_limit},
          {"test_limit", c.test_limit},
          {"threads", c.threads},
          {"eval_train", c.eval_train},
          {"data_dir", c.data_dir},
          {"checkpoint", c.checkpoint_path},
          {"metrics", c.metrics_path}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  const std::string s = "train";
  reject_unknown(j,
                 {"preset", "epochs", "batch_size", "lr", "seed", "train_limit",
                  "test_limit", "threads", "eval_train", "data_dir",
                  "checkpoint", "metrics"},
                 s);
  if (j.contains("preset")) {
    std::string p;
    read(j, "preset", p, s);
    c.preset = parse_preset(p);
  }
  read(j, "epochs", c.epochs, s);
  read(j, "batch_size", c.batch_size, s);
  read(j, "lr", c.lr, s);
  read(j, "seed", c.seed, s);
  read(j, "train_limit", c.train_limit, s);
  read(j, "test_limit", c.test_limit, s);
  read(j, "threads", c.threads, s);
  read(j, "eval_train", c.eval_train, s);
  read(j, "data_dir", c.data_dir, s);
  read(j, "checkpoint", c.checkpoint_path, s);
  read(j, "metrics", c.metrics_path, s);
  c.validate();
  return c;
}

RunConfig preset_run_config(Preset preset) {
  return {preset == Preset::Desk ? NetworkConfig::desk() : NetworkConfig::full(),
          TrainConfig::for_preset(preset)};
}

RunConfig run_config_from_json(const json& j, Preset preset) {
  reject_unknown(j, {"network", "train", "device"}, "config");
  RunConfig rc = preset_run_config(preset);
  if (j.contains("network")) {
    json net = j["network"];
    require_object(net, "network");
    if (!net.contains("preset"))
      net["preset"] = preset == Preset::Desk ? "desk" : "full";
    rc.network = network_config_from_json(net);
  }
  if (j.contains("train")) rc.train = train_config_from_json(j["train"], rc.train);
  if (j.contains("device")) {
    rc.network.device = device_params_from_json(j["device"]);
    rc.network.validate();
  }
  return rc;
}

}  // namespace rfsnn
