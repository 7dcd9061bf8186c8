#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rfsnn/rf_layers.hpp"

namespace rfsnn {

enum class LayerKind { RFConv, MaxPool, Oscillator, RFDense };

struct LayerSpec {
  LayerKind kind = LayerKind::RFConv;
  std::size_t filters = 0;  // RFConv
  std::size_t kernel = 0;   // RFConv
  std::size_t stride = 1;   // RFConv
  std::size_t padding = 0;  // RFConv
  std::size_t units = 0;    // RFDense

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class ZetaInit {
  Uniform,    ///< zeta ~ U[-zeta_range, zeta_range]
  Frequency,  ///< f_res ~ U[1, 2] GHz against the 1.5 GHz mid-band carrier
};

struct NetworkConfig {
  std::size_t input_height = 28;
  std::size_t input_width = 28;
  std::size_t input_channels = 1;
  std::vector<LayerSpec> layers;
  DeviceParams device;
  std::uint64_t seed = 1;
  int float_width = 32;
  ZetaInit zeta_init = ZetaInit::Uniform;
  double zeta_range = 0.003;
  double emit_scale = 1.0;
  double logit_std = 1.0;  // calibration target for the output layer
  SynapseModel synapse = SynapseModel::Resonator;
  NeuronModel neuron = NeuronModel::Oscillator;

  /// conv(32,5x5,pad 1) -> pool -> osc -> conv(64,5x5,pad 1) -> pool -> osc
  /// -> dense(10).
  static NetworkConfig full();
  /// Same topology with `conv1` and `conv2` filters.
  static NetworkConfig scaled(std::size_t conv1, std::size_t conv2);
  /// 8 / 16 filter variant for quick runs.
  static NetworkConfig desk() { return scaled(8, 16); }

  /// Shape after the input and after every layer.
  std::vector<Shape> shape_chain() const;
  /// Throws ConfigError on incompatible layers or invalid parameters.
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// JSON (de)serialization; unknown keys throw ConfigError naming the key.
nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DeviceParams& p);
DeviceParams device_params_from_json(const nlohmann::json& j);

struct MaxPoolLayer {};

/// A network instance: parameters plus the layer pipeline of a config.
template <std::floating_point T>
class Network {
 public:
  using Layer = std::variant<RFConv2DLayer<T>, MaxPoolLayer,
                             OscillatorActivation<T>, RFDenseLayer<T>>;

  /// Initializes parameters from the "init" sub-seed of cfg.seed.
  explicit Network(NetworkConfig cfg);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  const NetworkConfig& config() const { return cfg_; }

  /// Logits for one [H, W, C] image of RF powers. With trainable = true
  /// the parameters are bound to the tape for backward().
  Var forward(BasicTape<T>& tape, Var image, bool trainable = true);

  /// Same, recording the output of every layer (index-aligned with layers).
  Var forward(BasicTape<T>& tape, Var image, bool trainable,
              std::vector<Var>* layer_outputs);

  BasicTensor<T> logits(const BasicTensor<T>& image);

  /// Stable-ordered list of all parameters, named "<layer><n>.<field>".
  std::vector<BasicParameter<T>*> parameters();
  BasicParameter<T>* find_parameter(const std::string& name);

  /// One-time data-driven scale calibration on a batch of images:
  /// every oscillator i_gain is set so the median positive pre-activation
  /// current equals (I_th + I_max) / 2, then the output gain is set so the
  /// logits have standard deviation logit_std.
  void calibrate(const std::vector<BasicTensor<T>>& images);
  bool calibrated() const { return calibrated_; }
  void set_calibrated(bool v) { calibrated_ = v; }

  std::vector<Layer>& layers() { return layers_; }

  void zero_grad();

 private:
  NetworkConfig cfg_;
  std::vector<Layer> layers_;
  bool calibrated_ = false;
};

}  // namespace rfsnn
