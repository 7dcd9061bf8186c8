#include <gtest/gtest.h>

#include <set>

#include "rfsnn/hardware_map.hpp"
#include "test_support.hpp"

using namespace rfsnn;
using rfsnn::test::make_conv;
using rfsnn::test::max_rel_diff;
using rfsnn::test::random_tensor;

namespace {

LayerSpec conv_spec(std::size_t filters, std::size_t k, std::size_t pad) {
  LayerSpec s;
  s.kind = LayerKind::RFConv;
  s.filters = filters;
  s.kernel = k;
  s.padding = pad;
  return s;
}

NetworkConfig single_conv(std::size_t H, std::size_t W, std::size_t C, LayerSpec conv) {
  NetworkConfig cfg;
  cfg.input_height = H;
  cfg.input_width = W;
  cfg.input_channels = C;
  LayerSpec dense;
  dense.kind = LayerKind::RFDense;
  dense.units = 2;
  cfg.layers = {conv, dense};
  return cfg;
}

struct Enumerated {
  std::size_t resonators = 0;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> chains;
  std::set<std::tuple<std::ptrdiff_t, std::ptrdiff_t, std::size_t>> field_lines;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>, std::size_t> per_coeff;
  std::size_t positions = 0;
};

// Lists every resonator of the unrolled convolution explicitly.
Enumerated enumerate(std::size_t H, std::size_t W, std::size_t C, const LayerSpec& s) {
  Enumerated e;
  const auto k = static_cast<std::ptrdiff_t>(s.kernel);
  const auto p = static_cast<std::ptrdiff_t>(s.padding);
  for (std::ptrdiff_t top = -p; top + k <= static_cast<std::ptrdiff_t>(H) + p; ++top)
    for (std::ptrdiff_t left = -p; left + k <= static_cast<std::ptrdiff_t>(W) + p; ++left) {
      ++e.positions;
      const auto h = static_cast<std::size_t>(top + p), w = static_cast<std::size_t>(left + p);
      for (std::size_t m = 0; m < s.filters; ++m)
        for (std::ptrdiff_t i = 0; i < k; ++i)
          for (std::ptrdiff_t j = 0; j < k; ++j)
            for (std::size_t c = 0; c < C; ++c) {
              ++e.resonators;
              e.chains.insert({h, w, m});
              const std::ptrdiff_t y = top + i, x = left + j;
              if (y >= 0 && x >= 0 && y < static_cast<std::ptrdiff_t>(H) &&
                  x < static_cast<std::ptrdiff_t>(W))
                e.field_lines.insert({y, x, c});
              ++e.per_coeff[{static_cast<std::size_t>(i), static_cast<std::size_t>(j), c, m}];
            }
    }
  return e;
}

}  // namespace

TEST(CountDevices, ClosedFormsMatchEnumeration) {
  std::size_t configs = 0;
  for (std::size_t H = 1; H <= 6; ++H)
    for (std::size_t W = 1; W <= 6; ++W)
      for (std::size_t k = 1; k <= 3; ++k)
        for (std::size_t pad = 0; pad < k; ++pad)
          for (std::size_t C = 1; C <= 3; ++C)
            for (std::size_t M = 1; M <= 3; ++M) {
              if (H + 2 * pad < k || W + 2 * pad < k) continue;
              const LayerSpec s = conv_spec(M, k, pad);
              const LayoutReport r =
                  count_devices(single_conv(H, W, C, s), Arrangement::Crossbar);
              const LayerLayout& l = r.layers.at(0);
              const Enumerated e = enumerate(H, W, C, s);
              ASSERT_EQ(l.resonator_count, e.resonators);
              ASSERT_EQ(l.chain_count, e.chains.size());
              ASSERT_EQ(l.chain_length * l.chain_count, e.resonators);
              ASSERT_EQ(l.field_line_count, e.field_lines.size());
              ASSERT_EQ(l.write_line_count, e.per_coeff.size());
              for (const auto& [coeff, n] : e.per_coeff)
                ASSERT_EQ(l.devices_per_write_line, n);
              ASSERT_EQ(l.sequential_steps, e.positions);
              ASSERT_EQ(l.parallel_steps, 1u);
              ++configs;
            }
  EXPECT_GT(configs, 1000u);
}

TEST(CountDevices, FullScaleTotals) {
  const LayoutReport r = count_devices(NetworkConfig::full(), Arrangement::Crossbar);
  ASSERT_EQ(r.layers.size(), 3u);
  const auto& c1 = r.layers[0];
  const auto& c2 = r.layers[1];
  EXPECT_EQ(c1.resonator_count, 540800u);
  EXPECT_EQ(c1.write_line_count, 800u);
  EXPECT_EQ(c1.devices_per_write_line, 676u);
  EXPECT_EQ(c1.field_line_count, 784u);
  EXPECT_EQ(c1.oscillator_count, 13u * 13u * 32u);
  EXPECT_EQ(c2.resonator_count, 6195200u);
  EXPECT_EQ(c2.write_line_count, 5u * 5u * 32u * 64u);
  EXPECT_EQ(c2.devices_per_write_line, 121u);
  EXPECT_EQ(r.layers[2].resonator_count, 16000u);
  EXPECT_EQ(r.total_resonators(), 540800u + 6195200u + 16000u);

  const LayoutReport compact = count_devices(NetworkConfig::full(), Arrangement::Compact);
  EXPECT_EQ(compact.total_resonators(), r.total_resonators());
}

TEST(FrequencyPlan, GridAndResolvability) {
  const FrequencyPlan one = allocate_frequencies(1);
  ASSERT_EQ(one.carriers_ghz.size(), 1u);
  EXPECT_DOUBLE_EQ(one.carriers_ghz[0], 1.5);
  EXPECT_TRUE(one.feasible);

  const FrequencyPlan few = allocate_frequencies(11);
  EXPECT_NEAR(few.spacing_ghz, 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(few.carriers_ghz.front(), 1.0);
  EXPECT_DOUBLE_EQ(few.carriers_ghz.back(), 2.0);
  EXPECT_NEAR(few.min_spacing_ghz, 0.015, 1e-15);
  EXPECT_TRUE(few.feasible);
  for (std::size_t i = 1; i < few.carriers_ghz.size(); ++i)
    EXPECT_GT(few.carriers_ghz[i], few.carriers_ghz[i - 1]);

  EXPECT_TRUE(allocate_frequencies(67).feasible);
  EXPECT_FALSE(allocate_frequencies(68).feasible);
  EXPECT_FALSE(allocate_frequencies(784).feasible);
  EXPECT_TRUE(allocate_frequencies(784, 1.0, 2.0, 1e-3).feasible);

  EXPECT_THROW(allocate_frequencies(0), ConfigError);
  EXPECT_THROW(allocate_frequencies(3, 2.0, 1.0), ConfigError);
}

TEST(WriteLines, CrossbarDiagonalsAndCompactColumns) {
  const LayerSpec s = conv_spec(2, 3, 1);
  const auto cross = write_line_groups(5, 4, 2, s, Arrangement::Crossbar);
  const auto compact = write_line_groups(5, 4, 2, s, Arrangement::Compact);
  ASSERT_EQ(cross.size(), 3u * 3u * 2u * 2u);
  ASSERT_EQ(compact.size(), cross.size());
  std::set<GridPosition> cross_slots, compact_slots;
  for (const auto& [id, g] : cross) {
    const auto& other = compact.at(id);
    EXPECT_EQ(g.members, other.members);
    ASSERT_EQ(g.members.size(), 20u);
    std::set<std::size_t> rows, cols;
    for (std::size_t n = 0; n < g.members.size(); ++n) {
      EXPECT_EQ(g.members[n].i, id.i);
      EXPECT_EQ(g.members[n].m, id.m);
      rows.insert(g.positions[n].row);
      cols.insert(g.positions[n].column);
      cross_slots.insert(g.positions[n]);
      compact_slots.insert(other.positions[n]);
      EXPECT_EQ(other.positions[n].column, other.positions[0].column);
    }
    EXPECT_EQ(rows.size(), g.members.size());
    EXPECT_EQ(cols.size(), g.members.size());
  }
  EXPECT_EQ(cross_slots.size(), 20u * cross.size());
  EXPECT_EQ(compact_slots.size(), 20u * cross.size());

  const auto from_cfg = write_line_groups(NetworkConfig::desk(), 1, Arrangement::Compact);
  EXPECT_EQ(from_cfg.size(), 5u * 5u * 8u * 16u);
  EXPECT_EQ(from_cfg.begin()->second.members.size(), 121u);
  EXPECT_THROW(write_line_groups(NetworkConfig::desk(), 2, Arrangement::Compact), ConfigError);
}

TEST(Schedule, StepCounts) {
  NetworkConfig cfg = single_conv(3, 3, 1, conv_spec(1, 3, 1));
  const ScheduleReport s = sequential_schedule(cfg);
  EXPECT_EQ(s.sequential_steps, (std::vector<std::size_t>{9, 1}));
  EXPECT_EQ(s.parallel_steps, (std::vector<std::size_t>{1, 1}));
  const ScheduleReport full = sequential_schedule(NetworkConfig::full());
  EXPECT_EQ(full.sequential_steps, (std::vector<std::size_t>{676, 121, 1}));
}

TEST(SequentialConv, MatchesParallelForward) {
  Rng rng(21);
  for (int n = 0; n < 50; ++n) {
    const std::size_t k = 1 + 2 * rng.uniform_below(2);
    const std::size_t pad = rng.uniform_below(k == 1 ? 1 : 2);
    const std::size_t H = k + rng.uniform_below(6), W = k + rng.uniform_below(6);
    const std::size_t C = 1 + rng.uniform_below(3), M = 1 + rng.uniform_below(3);
    auto layer = make_conv(rng, k, C, M, pad);
    const auto P = random_tensor(rng, {H, W, C}, 0, 1);
    const SequentialResult seq = simulate_sequential_conv(P, layer);
    const auto par = rf_conv_forward(P, layer);
    ASSERT_EQ(seq.output.shape(), par.shape());
    EXPECT_LE(max_rel_diff(seq.output.data(), par.data()), 1e-12) << "instance " << n;
    EXPECT_EQ(seq.steps.size(), par.dim(0) * par.dim(1));
    EXPECT_EQ(seq.steps.front(), std::make_pair(std::size_t{0}, std::size_t{0}));
  }
}

TEST(SequentialConv, RejectsBadInput) {
  Rng rng(22);
  auto layer = make_conv(rng, 3, 2, 2, 0);
  EXPECT_THROW(simulate_sequential_conv(random_tensor(rng, {4, 4, 1}, 0, 1), layer),
               ConfigError);
  EXPECT_THROW(simulate_sequential_conv(random_tensor(rng, {4, 4, 2}, -1, -0.5), layer),
               DomainError);
}

TEST(Report, JsonAndText) {
  const LayoutReport r = count_devices(NetworkConfig::desk(), Arrangement::Compact);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("arrangement"), "compact");
  EXPECT_EQ(j.at("total_resonators").get<std::size_t>(), r.total_resonators());
  ASSERT_EQ(j.at("layers").size(), 3u);
  const auto& l0 = j.at("layers")[0];
  for (const char* key : {"layer", "resonators", "oscillators", "field_lines", "write_lines",
                          "devices_per_write_line", "chain_length", "sequential_steps",
                          "arrangement", "frequency_plan"})
    EXPECT_TRUE(l0.contains(key)) << key;
  EXPECT_EQ(l0.at("layer"), "conv1");
  EXPECT_EQ(l0.at("resonators").get<std::size_t>(), 676u * 25u * 8u);
  EXPECT_EQ(j.at("layers")[2].at("layer"), "dense1");

  const std::string text = to_text(r);
  EXPECT_NE(text.find("conv2"), std::string::npos);
  EXPECT_NE(text.find(std::to_string(r.total_resonators())), std::string::npos);
  EXPECT_EQ(parse_arrangement("crossbar"), Arrangement::Crossbar);
  EXPECT_THROW(parse_arrangement("grid"), ConfigError);
}
