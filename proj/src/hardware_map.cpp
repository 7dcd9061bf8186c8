#include "rfsnn/hardware_map.hpp"

#include <fmt/format.h>

namespace rfsnn {

std::string to_string(Arrangement a) {
  return a == Arrangement::Crossbar ? "crossbar" : "compact";
}

Arrangement parse_arrangement(const std::string& s) {
  if (s == "crossbar") return Arrangement::Crossbar;
  if (s == "compact") return Arrangement::Compact;
  throw ConfigError("arrangement: expected \"crossbar\" or \"compact\", got \"" +
                    s + "\"");
}

FrequencyPlan allocate_frequencies(std::size_t n_lines, double band_low_ghz,
                                   double band_high_ghz, double min_spacing_ghz,
                                   const DeviceParams& device) {
  if (n_lines == 0) throw ConfigError("allocate_frequencies: n_lines must be >= 1");
  if (!(band_low_ghz > 0 && band_high_ghz > band_low_ghz))
    throw ConfigError("allocate_frequencies: band must satisfy 0 < low < high");
  FrequencyPlan plan;
  plan.band_low_ghz = band_low_ghz;
  plan.band_high_ghz = band_high_ghz;
  const double mid = 0.5 * (band_low_ghz + band_high_ghz);
  plan.min_spacing_ghz = min_spacing_ghz > 0 ? min_spacing_ghz : device.alpha * mid;
  if (n_lines == 1) {
    plan.carriers_ghz = {mid};
    plan.spacing_ghz = 0;
    plan.feasible = true;
    return plan;
  }
  const double span = band_high_ghz - band_low_ghz;
  plan.spacing_ghz = span / static_cast<double>(n_lines - 1);
  plan.carriers_ghz.resize(n_lines);
  for (std::size_t i = 0; i < n_lines; ++i)
    plan.carriers_ghz[i] =
        band_low_ghz + span * static_cast<double>(i) / static_cast<double>(n_lines - 1);
  plan.carriers_ghz.back() = band_high_ghz;
  plan.feasible = plan.spacing_ghz >= plan.min_spacing_ghz;
  return plan;
}

std::size_t LayoutReport::total_resonators() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.resonator_count;
  return n;
}

namespace {

// Neurons driven by synaptic layer `li`: the oscillator layer that follows
// it before the next synaptic layer, if any.
std::size_t driven_oscillators(const NetworkConfig& cfg,
                               const std::vector<Shape>& chain, std::size_t li) {
  for (std::size_t k = li + 1; k < cfg.layers.size(); ++k) {
    const auto kind = cfg.layers[k].kind;
    if (kind == LayerKind::RFConv || kind == LayerKind::RFDense) return 0;
    if (kind == LayerKind::Oscillator) return shape_size(chain[k + 1]);
  }
  return 0;
}

}  // namespace

LayoutReport count_devices(const NetworkConfig& cfg, Arrangement arrangement) {
  cfg.validate();
  const auto chain = cfg.shape_chain();
  LayoutReport report;
  report.arrangement = arrangement;
  std::size_t n_conv = 0, n_dense = 0;
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    const LayerSpec& spec = cfg.layers[li];
    const Shape& in = chain[li];
    const Shape& out = chain[li + 1];
    LayerLayout l;
    l.layer_index = li;
    l.arrangement = arrangement;
    if (spec.kind == LayerKind::RFConv) {
      l.name = "conv" + std::to_string(++n_conv);
      const std::size_t positions = out[0] * out[1];
      const std::size_t coeffs = spec.kernel * spec.kernel * in[2];
      l.chain_count = positions * spec.filters;
      l.chain_length = coeffs;
      l.resonator_count = l.chain_count * l.chain_length;
      l.write_line_count = coeffs * spec.filters;
      l.devices_per_write_line = positions;
      l.field_line_count = in[0] * in[1] * in[2];
      l.sequential_steps = positions;
    } else if (spec.kind == LayerKind::RFDense) {
      l.name = "dense" + std::to_string(++n_dense);
      const std::size_t n_in = shape_size(in);
      l.chain_count = spec.units;
      l.chain_length = n_in;
      l.resonator_count = n_in * spec.units;
      l.write_line_count = l.resonator_count;
      l.devices_per_write_line = 1;
      l.field_line_count = n_in;
      l.sequential_steps = 1;
    } else {
      continue;
    }
    l.parallel_steps = 1;
    l.oscillator_count = driven_oscillators(cfg, chain, li);
    l.frequency_plan =
        allocate_frequencies(l.field_line_count, 1.0, 2.0, -1.0, cfg.device);
    report.layers.push_back(std::move(l));
  }
  return report;
}

ScheduleReport sequential_schedule(const NetworkConfig& cfg) {
  ScheduleReport s;
  for (const auto& l : count_devices(cfg, Arrangement::Crossbar).layers) {
    s.sequential_steps.push_back(l.sequential_steps);
    s.parallel_steps.push_back(l.parallel_steps);
  }
  return s;
}

std::map<CoefficientId, WriteLineGroup> write_line_groups(
    std::size_t height, std::size_t width, std::size_t channels,
    const LayerSpec& conv, Arrangement arrangement) {
  if (conv.kind != LayerKind::RFConv)
    throw ConfigError("write_line_groups: not a convolution layer");
  const std::size_t k = conv.kernel, p = conv.padding, s = conv.stride;
  const Extent2D o = output_shape(height, width, k, s, p);
  const std::size_t padded_w = width + 2 * p;
  const std::size_t positions = o.height * o.width;

  std::map<CoefficientId, WriteLineGroup> groups;
  for (std::size_t m = 0; m < conv.filters; ++m)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < channels; ++c) {
          WriteLineGroup& g = groups[{i, j, c, m}];
          g.members.reserve(positions);
          g.positions.reserve(positions);
          for (std::size_t h = 0; h < o.height; ++h)
            for (std::size_t w = 0; w < o.width; ++w) {
              g.members.push_back({h, w, m, i, j, c});
              GridPosition pos;
              if (arrangement == Arrangement::Crossbar) {
                pos.row = ((h * s + i) * padded_w + (w * s + j)) * channels + c;
                pos.column = m * positions + h * o.width + w;
              } else {
                pos.row = h * o.width + w;
                pos.column = ((m * k + i) * k + j) * channels + c;
              }
              g.positions.push_back(pos);
            }
        }
  return groups;
}

std::map<CoefficientId, WriteLineGroup> write_line_groups(
    const NetworkConfig& cfg, std::size_t conv_ordinal, Arrangement arrangement) {
  const auto chain = cfg.shape_chain();
  std::size_t seen = 0;
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    if (cfg.layers[li].kind != LayerKind::RFConv) continue;
    if (seen++ == conv_ordinal)
      return write_line_groups(chain[li][0], chain[li][1], chain[li][2],
                               cfg.layers[li], arrangement);
  }
  throw ConfigError("write_line_groups: network has no convolution #" +
                    std::to_string(conv_ordinal));
}

nlohmann::json to_json(const LayoutReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : r.layers) {
    layers.push_back({
        {"layer", l.name},
        {"resonators", l.resonator_count},
        {"oscillators", l.oscillator_count},
        {"field_lines", l.field_line_count},
        {"write_lines", l.write_line_count},
        {"devices_per_write_line", l.devices_per_write_line},
        {"chain_length", l.chain_length},
        {"sequential_steps", l.sequential_steps},
        {"arrangement", to_string(l.arrangement)},
        {"frequency_plan",
         {{"count", l.frequency_plan.carriers_ghz.size()},
          {"spacing_ghz", l.frequency_plan.spacing_ghz},
          {"feasible", l.frequency_plan.feasible}}},
    });
  }
  return {{"arrangement", to_string(r.arrangement)},
          {"total_resonators", r.total_resonators()},
          {"layers", std::move(layers)}};
}

std::string to_text(const LayoutReport& r) {
  std::string out = fmt::format("arrangement: {}\n", to_string(r.arrangement));
  for (const auto& l : r.layers) {
    out += fmt::format(
        "{}\n"
        "  resonators              {}\n"
        "  chains x length         {} x {}\n"
        "  oscillators driven      {}\n"
        "  field-lines             {}\n"
        "  write-lines             {}\n"
        "  devices per write-line  {}\n"
        "  steps seq / parallel    {} / {}\n"
        "  carriers                {} at {:.4f} MHz spacing ({}; linewidth {:.3f} MHz)\n",
        l.name, l.resonator_count, l.chain_count, l.chain_length,
        l.oscillator_count, l.field_line_count, l.write_line_count,
        l.devices_per_write_line, l.sequential_steps, l.parallel_steps,
        l.frequency_plan.carriers_ghz.size(), l.frequency_plan.spacing_ghz * 1e3,
        l.frequency_plan.feasible ? "resolvable" : "below linewidth",
        l.frequency_plan.min_spacing_ghz * 1e3);
  }
  out += fmt::format("total resonators: {}\n", r.total_resonators());
  return out;
}

SequentialResult simulate_sequential_conv(const BasicTensor<double>& input,
                                          const RFConv2DLayer<double>& layer) {
  if (input.rank() != 3)
    throw ConfigError("simulate_sequential_conv: expected [H,W,C] input");
  const auto& f = layer.filter;
  const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
  const std::size_t k = f.kernel(), M = f.filters();
  if (C != f.channels())
    throw ConfigError("simulate_sequential_conv: channel mismatch");
  require_nonnegative_power(input.data(), "simulate_sequential_conv");
  const Extent2D o = output_shape(H, W, k, layer.stride, layer.padding);

  // Weights programmed once into the chain of each filter.
  const auto map = weight_map<double>(layer.device, layer.synapse);
  std::vector<double> weights(f.zeta.value.size());
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = map.f(f.zeta.value[i]);
  const double gain = f.gain.value[0];

  SequentialResult r;
  r.output = BasicTensor<double>({o.height, o.width, M});
  std::vector<double> chain(M);
  for (std::size_t h = 0; h < o.height; ++h)
    for (std::size_t w = 0; w < o.width; ++w) {
      r.steps.emplace_back(h, w);
      std::fill(chain.begin(), chain.end(), 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        const auto y = static_cast<std::ptrdiff_t>(h * layer.stride + i) -
                       static_cast<std::ptrdiff_t>(layer.padding);
        if (y < 0 || y >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t j = 0; j < k; ++j) {
          const auto x = static_cast<std::ptrdiff_t>(w * layer.stride + j) -
                         static_cast<std::ptrdiff_t>(layer.padding);
          if (x < 0 || x >= static_cast<std::ptrdiff_t>(W)) continue;
          for (std::size_t c = 0; c < C; ++c) {
            const double p =
                input[(static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)) *
                          C + c];
            const std::size_t row = ((i * k + j) * C + c) * M;
            for (std::size_t m = 0; m < M; ++m) chain[m] += p * weights[row + m];
          }
        }
      }
      for (std::size_t m = 0; m < M; ++m)
        r.output[(h * o.width + w) * M + m] = gain * (chain[m] + f.bias.value[m]);
    }
  return r;
}

}  // namespace rfsnn
