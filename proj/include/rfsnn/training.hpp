#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfsnn/checkpoint.hpp"
#include "rfsnn/mnist_io.hpp"
#include "rfsnn/network.hpp"

namespace rfsnn {

// ---- Adam -----------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <std::floating_point T>
struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  std::vector<BasicTensor<T>> m;  // index-aligned with the parameter list
  std::vector<BasicTensor<T>> v;
};

/// Bias-corrected Adam update using each parameter's accumulated grad:
///   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
///   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// Moments are created on the first call. Throws NumericError naming the
/// step and parameter when a gradient is not finite; nothing is updated then.
template <std::floating_point T>
void adam_step(std::span<BasicParameter<T>* const> params, AdamState<T>& state);

// ---- configuration ----------------------------------------------------------

enum class Preset { Full, Desk };

struct TrainConfig {
  Preset preset = Preset::Full;
  std::size_t epochs = 10;
  std::size_t batch_size = 20;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  std::size_t train_limit = 0;  // 0 = whole training set
  std::size_t test_limit = 0;   // 0 = whole test set
  std::size_t threads = 1;
  bool eval_train = true;
  std::string data_dir;
  std::string checkpoint_path;
  std::string metrics_path;

  /// Protocol defaults of a preset: full = 10 epochs on all 60k samples,
  /// desk = 1 epoch on the first 10k.
  static TrainConfig for_preset(Preset p);
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Starts from `base` and overrides the keys present in `j`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base);
Preset parse_preset(const std::string& s);

/// A complete run description: the JSON config file of the CLI.
struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
};

/// Preset defaults overridden by the sections "network", "train" and
/// "device" (the latter replaces network.device). Unknown keys throw.
RunConfig run_config_from_json(const nlohmann::json& j, Preset preset);
RunConfig preset_run_config(Preset preset);
std::string to_string(Preset p);

// ---- metrics ----------------------------------------------------------------

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;  // "train" | "test"
  double accuracy_percent = 0;
  double mean_loss = 0;
  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct EvalResult {
  double accuracy_percent = 0;
  double mean_loss = 0;
  std::size_t samples = 0;
};

/// Scores arbitrary logits against labels: argmax (first index on ties)
/// versus label, and mean cross-entropy.
EvalResult evaluate_predictions(
    const std::function<std::vector<double>(std::size_t)>& logits_for,
    std::span<const std::uint8_t> labels);

template <std::floating_point T>
EvalResult evaluate(Network<T>& net, const Dataset& data,
                    std::size_t threads = 1);

/// CSV `epoch,split,accuracy_percent,mean_loss`, one row per (epoch, split).
void export_curves(std::span<const EpochMetrics> metrics,
                   const std::filesystem::path& path);
std::string curves_to_csv(std::span<const EpochMetrics> metrics);
std::vector<EpochMetrics> parse_curves(const std::string& csv);

// ---- trainer ----------------------------------------------------------------

/// Minibatch training of a Network with Adam, resumable through checkpoints.
template <std::floating_point T>
class Trainer {
 public:
  Trainer(NetworkConfig net_cfg, TrainConfig cfg);

  Network<T>& network() { return net_; }
  const TrainConfig& config() const { return cfg_; }
  AdamState<T>& optimizer() { return adam_; }

  /// Runs one optimizer step on the next batch of the current epoch and
  /// returns its mean loss; nullopt once the epoch is exhausted.
  std::optional<double> step(const Dataset& train);
  void next_epoch();

  /// Mean loss over the given samples with the current parameters.
  double batch_loss(const Dataset& data, std::span<const std::size_t> indices);

  /// Full protocol: epochs from the current position, metrics after each,
  /// best-test-accuracy checkpoint and CSV written when paths are set.
  std::vector<EpochMetrics> fit(
      const Dataset& train, const Dataset& test,
      const std::function<void(const EpochMetrics&)>& on_metrics = {});

  std::size_t epoch() const { return epoch_; }
  std::size_t global_step() const { return step_; }
  const std::vector<EpochMetrics>& history() const { return history_; }

  Checkpoint checkpoint() const;
  static Trainer restore(const Checkpoint& ckpt);

 private:
  struct Restore {};
  Trainer(Restore, const Checkpoint& ckpt);

  void compute_gradients(const Dataset& data,
                         std::span<const std::size_t> indices,
                         std::vector<double>* losses);

  TrainConfig cfg_;
  Network<T> net_;
  AdamState<T> adam_;
  std::uint64_t shuffle_seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::size_t step_ = 0;
  double best_test_accuracy_ = -1;
  std::vector<EpochMetrics> history_;
};

/// Network with parameters, calibration flag and config restored from a
/// checkpoint, ready for inference.
template <std::floating_point T>
Network<T> network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace rfsnn
