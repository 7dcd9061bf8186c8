#pragma once

// Network layers built from resonator chains and oscillator neurons.
//
// A convolution filter bank is parameterized by the detuning zeta of every
// coefficient rather than by resonance frequencies: each resonator is tuned
// to f_res = f_rf * (1 - zeta) of whatever carrier it receives, so the
// rectified weight depends on zeta alone and one coefficient can be shared
// by all filter positions.

#include <concepts>
#include <cstddef>
#include <span>
#include <string>

#include "rfsnn/autodiff.hpp"
#include "rfsnn/device_models.hpp"
#include "rfsnn/geometry.hpp"

namespace rfsnn {

/// How a synaptic parameter becomes a weight.
enum class SynapseModel {
  Resonator,  ///< weight = synaptic_weight_zeta(zeta)
  Linear,     ///< weight = parameter (conventional software baseline)
};

/// Activation between convolution stages.
enum class NeuronModel {
  Oscillator,  ///< emit_scale * oscillator_power(i_gain * U)
  Relu,        ///< max(U, 0) (conventional software baseline)
};

/// zeta [k, k, N_c, N_m], bias [N_m] in uV, scalar output gain.
template <std::floating_point T>
struct ZetaFilter {
  BasicParameter<T> zeta;
  BasicParameter<T> bias;
  BasicParameter<T> gain;

  std::size_t kernel() const { return zeta.value.dim(0); }
  std::size_t channels() const { return zeta.value.dim(2); }
  std::size_t filters() const { return zeta.value.dim(3); }
};

template <std::floating_point T>
struct RFConv2DLayer {
  ZetaFilter<T> filter;
  std::size_t stride = 1;
  std::size_t padding = 0;
  DeviceParams device;
  SynapseModel synapse = SynapseModel::Resonator;
};

template <std::floating_point T>
struct RFDenseLayer {
  BasicParameter<T> zeta;  // [n_in, n_out]
  BasicParameter<T> bias;  // [n_out]
  BasicParameter<T> gain;  // [1]
  DeviceParams device;
  SynapseModel synapse = SynapseModel::Resonator;
};

template <std::floating_point T>
struct OscillatorActivation {
  BasicParameter<T> i_gain;  // [1], mA per uV
  DeviceParams device;
  double emit_scale = 1.0;  // uW emitted at p = 1
  NeuronModel neuron = NeuronModel::Oscillator;
};

/// Elementwise weight map for a synapse model.
template <std::floating_point T>
ScalarMap<T> weight_map(const DeviceParams& device, SynapseModel model);

/// Elementwise oscillator_power map.
template <std::floating_point T>
ScalarMap<T> oscillator_map(const DeviceParams& device);

/// Chain voltages U[h,w,m] = gain * (sum_{i,j,c} P[h+i,w+j,c] W(zeta[i,j,c,m])
/// + b[m]) for an [H,W,N_c] input of RF powers. Throws DomainError on
/// negative input power.
template <std::floating_point T>
Var rf_conv_forward(BasicTape<T>& tape, Var input, RFConv2DLayer<T>& layer,
                    bool trainable = true);

/// out[o] = gain * (sum_i P[i] W(zeta[i,o]) + b[o]) for a 1-D power vector
/// (any input rank is flattened).
template <std::floating_point T>
Var rf_dense_forward(BasicTape<T>& tape, Var input, RFDenseLayer<T>& layer,
                     bool trainable = true);

/// Emitted RF power of an oscillator layer driven by chain voltages U.
template <std::floating_point T>
Var oscillator_forward(BasicTape<T>& tape, Var u, OscillatorActivation<T>& act,
                       bool trainable = true);

/// Tape-free convenience wrappers.
template <std::floating_point T>
BasicTensor<T> rf_conv_forward(const BasicTensor<T>& input,
                               RFConv2DLayer<T>& layer);
template <std::floating_point T>
BasicTensor<T> rf_dense_forward(const BasicTensor<T>& input,
                                RFDenseLayer<T>& layer);
template <std::floating_point T>
BasicTensor<T> oscillator_forward(const BasicTensor<T>& u,
                                  OscillatorActivation<T>& act);

/// Same chain voltages evaluated resonator by resonator with explicit
/// frequencies: input (y, x, c) is carried at carriers[(y*W + x)*C + c] GHz
/// and each resonator is tuned to f_res = carrier * (1 - zeta), then
/// rectified_voltage() is summed along each chain. Resonator synapses only.
BasicTensor<double> rf_conv_forward_explicit(
    const BasicTensor<double>& input, const RFConv2DLayer<double>& layer,
    std::span<const double> carriers);

void require_nonnegative_power(std::span<const float> p, const char* where);
void require_nonnegative_power(std::span<const double> p, const char* where);

}  // namespace rfsnn
