#include "rfsnn/network.hpp"

#include <algorithm>
#include <cmath>

#include "rfsnn/rng.hpp"

namespace rfsnn {

NetworkConfig NetworkConfig::scaled(std::size_t conv1, std::size_t conv2) {
  NetworkConfig cfg;
  cfg.layers = {
      {.kind = LayerKind::RFConv, .filters = conv1, .kernel = 5, .stride = 1,
       .padding = 1},
      {.kind = LayerKind::MaxPool},
      {.kind = LayerKind::Oscillator},
      {.kind = LayerKind::RFConv, .filters = conv2, .kernel = 5, .stride = 1,
       .padding = 1},
      {.kind = LayerKind::MaxPool},
      {.kind = LayerKind::Oscillator},
      {.kind = LayerKind::RFDense, .units = 10},
  };
  return cfg;
}

NetworkConfig NetworkConfig::full() { return scaled(32, 64); }

std::vector<Shape> NetworkConfig::shape_chain() const {
  std::vector<Shape> chain{{input_height, input_width, input_channels}};
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const LayerSpec& l = layers[li];
    const Shape& in = chain.back();
    const std::string where = "layer " + std::to_string(li) + ": ";
    switch (l.kind) {
      case LayerKind::RFConv: {
        if (in.size() != 3)
          throw ConfigError(where + "convolution needs an [H,W,C] input, got " +
                            shape_to_string(in));
        if (l.filters == 0) throw ConfigError(where + "filters must be >= 1");
        const Extent2D o =
            output_shape(in[0], in[1], l.kernel, l.stride, l.padding);
        chain.push_back({o.height, o.width, l.filters});
        break;
      }
      case LayerKind::MaxPool: {
        if (in.size() != 3)
          throw ConfigError(where + "max-pool needs an [H,W,C] input, got " +
                            shape_to_string(in));
        const Extent2D o = pool_output_shape(in[0], in[1]);
        chain.push_back({o.height, o.width, in[2]});
        break;
      }
      case LayerKind::Oscillator:
        chain.push_back(in);
        break;
      case LayerKind::RFDense:
        if (l.units == 0) throw ConfigError(where + "units must be >= 1");
        chain.push_back({l.units});
        break;
    }
  }
  return chain;
}

void NetworkConfig::validate() const {
  device.validate();
  if (input_height == 0 || input_width == 0 || input_channels == 0)
    throw ConfigError("network: input extents must be positive");
  if (float_width != 32 && float_width != 64)
    throw ConfigError("network: float_width must be 32 or 64, got " +
                      std::to_string(float_width));
  if (layers.empty() || layers.back().kind != LayerKind::RFDense)
    throw ConfigError("network: the last layer must be a dense layer "
                      "producing the logits");
  if (!(zeta_range > 0 && zeta_range < 1))
    throw ConfigError("network: zeta_range must lie in (0, 1)");
  if (!(emit_scale > 0)) throw ConfigError("network: emit_scale must be > 0");
  if (!(logit_std > 0)) throw ConfigError("network: logit_std must be > 0");
  shape_chain();
}

namespace {

constexpr double kMidBandGHz = 1.5;

template <std::floating_point T>
BasicTensor<T> init_synapses(Shape shape, std::size_t fan_in,
                             const NetworkConfig& cfg, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    double v = 0.0;
    if (cfg.synapse == SynapseModel::Linear) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      v = rng.uniform(-bound, bound);
    } else if (cfg.zeta_init == ZetaInit::Frequency) {
      v = fres_to_zeta(rng.uniform(1.0, 2.0), kMidBandGHz);
    } else {
      v = rng.uniform(-cfg.zeta_range, cfg.zeta_range);
    }
    t[i] = static_cast<T>(v);
  }
  return t;
}

template <std::floating_point T>
BasicTensor<T> scalar(T v) {
  return BasicTensor<T>({1}, v);
}

}  // namespace

template <std::floating_point T>
Network<T>::Network(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto chain = cfg_.shape_chain();
  Rng rng(derive_seed(cfg_.seed, "init"));
  std::size_t n_conv = 0, n_osc = 0, n_dense = 0;
  for (std::size_t li = 0; li < cfg_.layers.size(); ++li) {
    const LayerSpec& spec = cfg_.layers[li];
    const Shape& in = chain[li];
    switch (spec.kind) {
      case LayerKind::RFConv: {
        const std::string name = "conv" + std::to_string(++n_conv);
        const std::size_t k = spec.kernel, c = in[2], m = spec.filters;
        RFConv2DLayer<T> layer;
        layer.filter.zeta = {name + ".zeta",
                             init_synapses<T>({k, k, c, m}, k * k * c, cfg_, rng)};
        layer.filter.bias = {name + ".bias", BasicTensor<T>({m})};
        layer.filter.gain = {name + ".gain", scalar<T>(1)};
        layer.stride = spec.stride;
        layer.padding = spec.padding;
        layer.device = cfg_.device;
        layer.synapse = cfg_.synapse;
        layers_.emplace_back(std::move(layer));
        break;
      }
      case LayerKind::MaxPool:
        layers_.emplace_back(MaxPoolLayer{});
        break;
      case LayerKind::Oscillator: {
        const std::string name = "osc" + std::to_string(++n_osc);
        OscillatorActivation<T> act;
        act.i_gain = {name + ".i_gain", scalar<T>(1)};
        act.device = cfg_.device;
        act.emit_scale = cfg_.emit_scale;
        act.neuron = cfg_.neuron;
        layers_.emplace_back(std::move(act));
        break;
      }
      case LayerKind::RFDense: {
        const std::string name = "dense" + std::to_string(++n_dense);
        const std::size_t n_in = shape_size(in), n_out = spec.units;
        RFDenseLayer<T> layer;
        layer.zeta = {name + ".zeta",
                      init_synapses<T>({n_in, n_out}, n_in, cfg_, rng)};
        layer.bias = {name + ".bias", BasicTensor<T>({n_out})};
        layer.gain = {name + ".gain", scalar<T>(1)};
        layer.device = cfg_.device;
        layer.synapse = cfg_.synapse;
        layers_.emplace_back(std::move(layer));
        break;
      }
    }
  }
}

template <std::floating_point T>
Var Network<T>::forward(BasicTape<T>& tape, Var image, bool trainable) {
  return forward(tape, image, trainable, nullptr);
}

template <std::floating_point T>
Var Network<T>::forward(BasicTape<T>& tape, Var image, bool trainable,
                        std::vector<Var>* layer_outputs) {
  const Shape expected{cfg_.input_height, cfg_.input_width, cfg_.input_channels};
  if (tape.value(image).shape() != expected)
    throw ConfigError("network_forward: image shape " +
                      shape_to_string(tape.value(image).shape()) +
                      ", expected " + shape_to_string(expected));
  Var x = image;
  for (auto& layer : layers_) {
    x = std::visit(
        [&](auto& l) -> Var {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, RFConv2DLayer<T>>)
            return rf_conv_forward(tape, x, l, trainable);
          else if constexpr (std::is_same_v<L, MaxPoolLayer>)
            return maxpool2x2(tape, x);
          else if constexpr (std::is_same_v<L, OscillatorActivation<T>>)
            return oscillator_forward(tape, x, l, trainable);
          else
            return rf_dense_forward(tape, x, l, trainable);
        },
        layer);
    if (layer_outputs) layer_outputs->push_back(x);
  }
  return x;
}

template <std::floating_point T>
BasicTensor<T> Network<T>::logits(const BasicTensor<T>& image) {
  BasicTape<T> tape;
  return tape.value(forward(tape, tape.constant(image), false));
}

template <std::floating_point T>
std::vector<BasicParameter<T>*> Network<T>::parameters() {
  std::vector<BasicParameter<T>*> out;
  for (auto& layer : layers_) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, RFConv2DLayer<T>>) {
            out.push_back(&l.filter.zeta);
            out.push_back(&l.filter.bias);
            out.push_back(&l.filter.gain);
          } else if constexpr (std::is_same_v<L, OscillatorActivation<T>>) {
            if (l.neuron == NeuronModel::Oscillator) out.push_back(&l.i_gain);
          } else if constexpr (std::is_same_v<L, RFDenseLayer<T>>) {
            out.push_back(&l.zeta);
            out.push_back(&l.bias);
            out.push_back(&l.gain);
          }
        },
        layer);
  }
  return out;
}

template <std::floating_point T>
BasicParameter<T>* Network<T>::find_parameter(const std::string& name) {
  for (auto* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

template <std::floating_point T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <std::floating_point T>
void Network<T>::calibrate(const std::vector<BasicTensor<T>>& images) {
  if (images.empty()) throw ConfigError("calibrate: empty batch");

  // Collects every element of layer `index`'s input across the batch.
  auto collect_inputs = [&](std::size_t index) {
    std::vector<T> values;
    for (const auto& img : images) {
      BasicTape<T> tape;
      std::vector<Var> outs;
      forward(tape, tape.constant(img), false, &outs);
      const auto& v = tape.value(index == 0 ? Var{0} : outs[index - 1]);
      values.insert(values.end(), v.data().begin(), v.data().end());
    }
    return values;
  };

  const double target_current = 0.5 * (cfg_.device.I_th + cfg_.device.I_max);
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    auto* act = std::get_if<OscillatorActivation<T>>(&layers_[li]);
    if (!act || act->neuron != NeuronModel::Oscillator) continue;
    std::vector<T> positive;
    for (T u : collect_inputs(li))
      if (u > T{0}) positive.push_back(u);
    if (positive.empty()) continue;
    const std::size_t mid = (positive.size() - 1) / 2;
    std::nth_element(positive.begin(), positive.begin() + mid, positive.end());
    act->i_gain.value[0] = static_cast<T>(target_current / positive[mid]);
  }

  auto* dense = std::get_if<RFDenseLayer<T>>(&layers_.back());
  if (dense) {
    std::vector<T> logits = collect_inputs(layers_.size());
    double mean = 0.0, sq = 0.0;
    for (T v : logits) mean += v;
    mean /= static_cast<double>(logits.size());
    for (T v : logits) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(logits.size()));
    if (sd > 0 && std::isfinite(sd))
      dense->gain.value[0] = static_cast<T>(dense->gain.value[0] * cfg_.logit_std / sd);
  }
  calibrated_ = true;
}

template class Network<float>;
template class Network<double>;

}  // namespace rfsnn
