#include "rfsnn/rf_layers.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

namespace rfsnn {

namespace {

template <std::floating_point T>
void require_nonnegative(std::span<const T> p, const char* where) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < T{0} || !std::isfinite(p[i])) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%g", static_cast<double>(p[i]));
      throw DomainError(std::string(where) + ": input power at index " +
                        std::to_string(i) + " is " + buf +
                        "; RF powers must be finite and >= 0");
    }
  }
}

template <std::floating_point T>
Var bind(BasicTape<T>& tape, BasicParameter<T>& p, bool trainable) {
  return trainable ? tape.parameter(p) : tape.constant(p.value);
}

}  // namespace

void require_nonnegative_power(std::span<const float> p, const char* where) {
  require_nonnegative(p, where);
}
void require_nonnegative_power(std::span<const double> p, const char* where) {
  require_nonnegative(p, where);
}

template <std::floating_point T>
ScalarMap<T> weight_map(const DeviceParams& device, SynapseModel model) {
  if (model == SynapseModel::Linear)
    return {[](T z) { return z; }, [](T) { return T{1}; }};
  return {[device](T z) { return synaptic_weight_zeta(z, device); },
          [device](T z) { return synaptic_weight_zeta_grad(z, device); }};
}

template <std::floating_point T>
ScalarMap<T> oscillator_map(const DeviceParams& device) {
  return {[device](T i) { return oscillator_power(i, device); },
          [device](T i) { return oscillator_power_grad(i, device); }};
}

template <std::floating_point T>
Var rf_conv_forward(BasicTape<T>& tape, Var input, RFConv2DLayer<T>& layer,
                    bool trainable) {
  const auto& x = tape.value(input);
  if (x.rank() != 3)
    throw ConfigError("rf_conv_forward: expected [H,W,C] input, got " +
                      shape_to_string(x.shape()));
  auto& f = layer.filter;
  const std::size_t k = f.kernel(), channels = f.channels(), m = f.filters();
  if (x.dim(2) != channels)
    throw ConfigError("rf_conv_forward: input has " + std::to_string(x.dim(2)) +
                      " channels, filter expects " + std::to_string(channels));
  require_nonnegative(x.data(), "rf_conv_forward");
  const Extent2D o =
      output_shape(x.dim(0), x.dim(1), k, layer.stride, layer.padding);

  Var zeta = bind(tape, f.zeta, trainable);
  Var weights = elementwise_map(
      tape, reshape(tape, zeta, {k * k * channels, m}),
      weight_map<T>(layer.device, layer.synapse));
  Var patches = unfold_patches(tape, input, k, layer.stride, layer.padding);
  Var chains = matmul(tape, patches, weights);
  Var biased = add_bias(tape, chains, bind(tape, f.bias, trainable));
  Var scaled = scale(tape, biased, bind(tape, f.gain, trainable));
  return reshape(tape, scaled, {o.height, o.width, m});
}

template <std::floating_point T>
Var rf_dense_forward(BasicTape<T>& tape, Var input, RFDenseLayer<T>& layer,
                     bool trainable) {
  const auto& x = tape.value(input);
  const std::size_t n_in = layer.zeta.value.dim(0);
  const std::size_t n_out = layer.zeta.value.dim(1);
  if (x.size() != n_in)
    throw ConfigError("rf_dense_forward: input has " + std::to_string(x.size()) +
                      " elements, layer expects " + std::to_string(n_in));
  require_nonnegative(x.data(), "rf_dense_forward");

  Var weights = elementwise_map(tape, bind(tape, layer.zeta, trainable),
                                weight_map<T>(layer.device, layer.synapse));
  Var row = reshape(tape, input, {1, n_in});
  Var chains = matmul(tape, row, weights);
  Var biased = add_bias(tape, chains, bind(tape, layer.bias, trainable));
  Var scaled = scale(tape, biased, bind(tape, layer.gain, trainable));
  return reshape(tape, scaled, {n_out});
}

template <std::floating_point T>
Var oscillator_forward(BasicTape<T>& tape, Var u, OscillatorActivation<T>& act,
                       bool trainable) {
  if (act.neuron == NeuronModel::Relu) {
    return elementwise_map(
        tape, u,
        ScalarMap<T>{[](T x) { return x > T{0} ? x : T{0}; },
                     [](T x) { return x > T{0} ? T{1} : T{0}; }});
  }
  if (!(act.emit_scale > 0))
    throw ConfigError("oscillator_forward: emit_scale must be > 0");
  Var current = scale(tape, u, bind(tape, act.i_gain, trainable));
  Var power = elementwise_map(tape, current, oscillator_map<T>(act.device));
  return scalar_mul(tape, power, static_cast<T>(act.emit_scale));
}

template <std::floating_point T>
BasicTensor<T> rf_conv_forward(const BasicTensor<T>& input,
                               RFConv2DLayer<T>& layer) {
  BasicTape<T> tape;
  return tape.value(rf_conv_forward(tape, tape.constant(input), layer, false));
}

template <std::floating_point T>
BasicTensor<T> rf_dense_forward(const BasicTensor<T>& input,
                                RFDenseLayer<T>& layer) {
  BasicTape<T> tape;
  return tape.value(rf_dense_forward(tape, tape.constant(input), layer, false));
}

template <std::floating_point T>
BasicTensor<T> oscillator_forward(const BasicTensor<T>& u,
                                  OscillatorActivation<T>& act) {
  BasicTape<T> tape;
  return tape.value(oscillator_forward(tape, tape.constant(u), act, false));
}

BasicTensor<double> rf_conv_forward_explicit(
    const BasicTensor<double>& input, const RFConv2DLayer<double>& layer,
    std::span<const double> carriers) {
  if (layer.synapse != SynapseModel::Resonator)
    throw ConfigError("rf_conv_forward_explicit: resonator synapses only");
  if (input.rank() != 3)
    throw ConfigError("rf_conv_forward_explicit: expected [H,W,C] input");
  const auto& f = layer.filter;
  const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
  const std::size_t k = f.kernel(), M = f.filters();
  if (C != f.channels())
    throw ConfigError("rf_conv_forward_explicit: channel mismatch");
  if (carriers.size() != input.size())
    throw ConfigError("rf_conv_forward_explicit: need one carrier per input (" +
                      std::to_string(input.size()) + "), got " +
                      std::to_string(carriers.size()));
  require_nonnegative(input.data(), "rf_conv_forward_explicit");
  const Extent2D o = output_shape(H, W, k, layer.stride, layer.padding);
  const auto& zeta = f.zeta.value;
  const double gain = f.gain.value[0];

  BasicTensor<double> out({o.height, o.width, M});
  for (std::size_t h = 0; h < o.height; ++h)
    for (std::size_t w = 0; w < o.width; ++w)
      for (std::size_t m = 0; m < M; ++m) {
        double chain = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          const auto y = static_cast<std::ptrdiff_t>(h * layer.stride + i) -
                         static_cast<std::ptrdiff_t>(layer.padding);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t j = 0; j < k; ++j) {
            const auto x = static_cast<std::ptrdiff_t>(w * layer.stride + j) -
                           static_cast<std::ptrdiff_t>(layer.padding);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(W)) continue;
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t src =
                  (static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)) *
                      C + c;
              const double f_rf = carriers[src];
              const double z = zeta[((i * k + j) * C + c) * M + m];
              const double f_res = zeta_to_fres(z, f_rf);
              chain += rectified_voltage(input[src], f_rf, f_res, layer.device);
            }
          }
        }
        out[(h * o.width + w) * M + m] = gain * (chain + f.bias.value[m]);
      }
  return out;
}

#define RFSNN_INSTANTIATE(T)                                                  \
  template ScalarMap<T> weight_map<T>(const DeviceParams&, SynapseModel);     \
  template ScalarMap<T> oscillator_map<T>(const DeviceParams&);               \
  template Var rf_conv_forward<T>(BasicTape<T>&, Var, RFConv2DLayer<T>&,      \
                                  bool);                                      \
  template Var rf_dense_forward<T>(BasicTape<T>&, Var, RFDenseLayer<T>&,      \
                                   bool);                                     \
  template Var oscillator_forward<T>(BasicTape<T>&, Var,                      \
                                     OscillatorActivation<T>&, bool);         \
  template BasicTensor<T> rf_conv_forward<T>(const BasicTensor<T>&,           \
                                             RFConv2DLayer<T>&);              \
  template BasicTensor<T> rf_dense_forward<T>(const BasicTensor<T>&,          \
                                              RFDenseLayer<T>&);              \
  template BasicTensor<T> oscillator_forward<T>(const BasicTensor<T>&,        \
                                                OscillatorActivation<T>&);

RFSNN_INSTANTIATE(float)
RFSNN_INSTANTIATE(double)

#undef RFSNN_INSTANTIATE

}  // namespace rfsnn
