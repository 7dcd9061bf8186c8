#pragma once

// Hardware accounting for resonator-chain convolutions.
//
// A convolution layer with an [H, W, N_c] input, N_m filters of k x k and
// an H_out x W_out output is realized as H_out * W_out * N_m chains of
// k * k * N_c resonators. Every input signal has its own field-line; every
// filter coefficient (i, j, c, m) has one write-line tuning the H_out * W_out
// resonators that share it. Two placements exist: the crossbar (field-lines
// as rows, chains as columns, shared coefficients on diagonals) and the
// compact one (chains as rows, one column per coefficient).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfsnn/network.hpp"

namespace rfsnn {

enum class Arrangement { Crossbar, Compact };

std::string to_string(Arrangement a);
Arrangement parse_arrangement(const std::string& s);

struct FrequencyPlan {
  std::vector<double> carriers_ghz;  // strictly increasing
  double band_low_ghz = 1.0;
  double band_high_ghz = 2.0;
  double min_spacing_ghz = 0.0;
  double spacing_ghz = 0.0;  // achieved; 0 for a single carrier
  bool feasible = true;      // spacing >= min_spacing (or a single carrier)
};

/// Uniform grid of n_lines carriers spanning the band (a single carrier
/// sits mid-band). min_spacing <= 0 selects the linewidth alpha * f_mid.
/// An infeasible plan is flagged, not rejected.
FrequencyPlan allocate_frequencies(std::size_t n_lines, double band_low_ghz = 1.0,
                                   double band_high_ghz = 2.0,
                                   double min_spacing_ghz = -1.0,
                                   const DeviceParams& device = {});

struct LayerLayout {
  std::size_t layer_index = 0;  // index into NetworkConfig::layers
  std::string name;             // conv1, dense1, ...
  Arrangement arrangement = Arrangement::Crossbar;
  std::size_t resonator_count = 0;
  std::size_t oscillator_count = 0;  // neurons driven by this layer's chains
  std::size_t field_line_count = 0;
  std::size_t write_line_count = 0;
  std::size_t chain_count = 0;
  std::size_t chain_length = 0;
  std::size_t devices_per_write_line = 0;
  std::size_t sequential_steps = 0;
  std::size_t parallel_steps = 1;
  FrequencyPlan frequency_plan;
};

struct LayoutReport {
  Arrangement arrangement = Arrangement::Crossbar;
  std::vector<LayerLayout> layers;

  std::size_t total_resonators() const;
};

/// Closed-form device counts for every synaptic layer of cfg.
LayoutReport count_devices(const NetworkConfig& cfg, Arrangement arrangement);

struct ScheduleReport {
  std::vector<std::size_t> sequential_steps;  // per synaptic layer
  std::vector<std::size_t> parallel_steps;    // all 1
};

/// Steps to evaluate each synaptic layer with one reused chain per filter
/// (one step per output position) versus fully parallel chains.
ScheduleReport sequential_schedule(const NetworkConfig& cfg);

/// Physical slot of one resonator.
struct GridPosition {
  std::size_t row = 0;
  std::size_t column = 0;
  friend auto operator<=>(const GridPosition&, const GridPosition&) = default;
};

/// Resonator identity: output position (h, w), filter m, coefficient (i, j, c).
struct ResonatorId {
  std::size_t h = 0, w = 0, m = 0, i = 0, j = 0, c = 0;
  friend auto operator<=>(const ResonatorId&, const ResonatorId&) = default;
};

struct CoefficientId {
  std::size_t i = 0, j = 0, c = 0, m = 0;
  friend auto operator<=>(const CoefficientId&, const CoefficientId&) = default;
};

struct WriteLineGroup {
  std::vector<ResonatorId> members;
  /// Placement of each member. Crossbar: row = padded input index
  /// ((h+i) * (W+2p) + (w+j)) * N_c + c, column = chain m * H_out*W_out +
  /// h * W_out + w (a diagonal). Compact: row = chain h * W_out + w,
  /// column = ((m * k + i) * k + j) * N_c + c (a column).
  std::vector<GridPosition> positions;
};

/// Write-line groups of one convolution layer given its input extent.
std::map<CoefficientId, WriteLineGroup> write_line_groups(
    std::size_t height, std::size_t width, std::size_t channels,
    const LayerSpec& conv, Arrangement arrangement);

/// Groups for the `conv_ordinal`-th convolution layer of cfg (0-based).
std::map<CoefficientId, WriteLineGroup> write_line_groups(
    const NetworkConfig& cfg, std::size_t conv_ordinal, Arrangement arrangement);

nlohmann::json to_json(const LayoutReport& r);
std::string to_text(const LayoutReport& r);

/// Evaluates a convolution one output position per step, reusing a single
/// logical chain per filter: each step accumulates the chain's k*k*N_c
/// multiply-and-accumulate terms for every filter.
struct SequentialResult {
  BasicTensor<double> output;                          // [H_out, W_out, N_m]
  std::vector<std::pair<std::size_t, std::size_t>> steps;  // (h, w) per step
};

SequentialResult simulate_sequential_conv(const BasicTensor<double>& input,
                                          const RFConv2DLayer<double>& layer);

}  // namespace rfsnn
