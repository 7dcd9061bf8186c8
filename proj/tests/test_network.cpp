#include <gtest/gtest.h>

#include <cmath>

#include "rfsnn/network.hpp"
#include "test_support.hpp"

using namespace rfsnn;
using rfsnn::test::T64;
using rfsnn::test::random_tensor;

TEST(NetworkConfig, FullShapeChain) {
  const auto chain = NetworkConfig::full().shape_chain();
  const std::vector<Shape> expected{{28, 28, 1},  {26, 26, 32}, {13, 13, 32},
                                    {13, 13, 32}, {11, 11, 64}, {5, 5, 64},
                                    {5, 5, 64},   {10}};
  EXPECT_EQ(chain, expected);
  EXPECT_EQ(shape_size(chain[6]), 1600u);
}

TEST(NetworkConfig, DeskPresetFilters) {
  const auto cfg = NetworkConfig::desk();
  EXPECT_EQ(cfg.layers[0].filters, 8u);
  EXPECT_EQ(cfg.layers[3].filters, 16u);
  EXPECT_EQ(cfg.shape_chain().back(), Shape{10});
}

TEST(NetworkConfig, ValidationErrors) {
  auto cfg = NetworkConfig::full();
  cfg.float_width = 16;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = NetworkConfig::full();
  cfg.layers.pop_back();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = NetworkConfig::full();
  cfg.layers[0].kernel = 31;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = NetworkConfig::full();
  cfg.input_height = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(NetworkConfig, JsonRoundTripAndUnknownKeys) {
  auto cfg = NetworkConfig::desk();
  cfg.seed = 99;
  cfg.zeta_range = 0.1;
  cfg.neuron = NeuronModel::Relu;
  EXPECT_EQ(network_config_from_json(to_json(cfg)), cfg);

  auto j = to_json(cfg);
  j["bogus"] = 1;
  try {
    network_config_from_json(j);
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  j = to_json(cfg);
  j["layers"][0]["dilation"] = 2;
  EXPECT_THROW(network_config_from_json(j), ConfigError);
  j = to_json(cfg);
  j["layers"][0]["filters"] = -3;
  EXPECT_THROW(network_config_from_json(j), ConfigError);
  EXPECT_THROW(network_config_from_json({{"preset", "huge"}}), ConfigError);
  EXPECT_EQ(network_config_from_json({{"preset", "desk"}}), NetworkConfig::desk());
}

TEST(Network, ParameterNamesAndOrder) {
  Network<float> net(NetworkConfig::desk());
  std::vector<std::string> names;
  for (auto* p : net.parameters()) names.push_back(p->name);
  const std::vector<std::string> expected{
      "conv1.zeta", "conv1.bias", "conv1.gain", "osc1.i_gain", "conv2.zeta",
      "conv2.bias", "conv2.gain", "osc2.i_gain", "dense1.zeta", "dense1.bias",
      "dense1.gain"};
  EXPECT_EQ(names, expected);
  EXPECT_EQ(net.find_parameter("conv2.zeta")->value.shape(), (Shape{5, 5, 8, 16}));
  EXPECT_EQ(net.find_parameter("dense1.zeta")->value.shape(), (Shape{400, 10}));
  EXPECT_EQ(net.find_parameter("nope"), nullptr);
}

TEST(Network, ZeroImageGivesUniformLogits) {
  Network<double> net(NetworkConfig::scaled(4, 8));
  const T64 logits = net.logits(T64({28, 28, 1}));
  for (double v : logits.data()) EXPECT_EQ(v, logits[0]);
  Tape64 tape;
  Var z = tape.constant(logits);
  EXPECT_NEAR(tape.value(softmax_cross_entropy(tape, z, 3))[0], std::log(10.0), 1e-12);
}

TEST(Network, FirstLayerIsLinearInInputPower) {
  Rng rng(3);
  Network<double> net(NetworkConfig::scaled(4, 8));
  const T64 img = random_tensor(rng, {28, 28, 1}, 0, 1);
  T64 doubled = img;
  for (auto& v : doubled.data()) v *= 2;
  auto conv1 = [&](const T64& x) {
    Tape64 tape;
    std::vector<Var> outs;
    net.forward(tape, tape.constant(x), false, &outs);
    return tape.value(outs[0]);
  };
  const T64 a = conv1(img), b = conv1(doubled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 2 * a[i], 1e-12 * std::abs(a[i]) + 1e-12);
}

TEST(Network, DeterministicGivenSeed) {
  Rng rng(4);
  const Tensor img = random_tensor(rng, {28, 28, 1}, 0, 1).cast<float>();
  auto cfg = NetworkConfig::desk();
  cfg.seed = 17;
  Network<float> a(cfg), b(cfg);
  EXPECT_EQ(a.logits(img), b.logits(img));
  EXPECT_EQ(a.logits(img), a.logits(img));
  cfg.seed = 18;
  Network<float> c(cfg);
  EXPECT_NE(a.logits(img), c.logits(img));
}

TEST(Network, RejectsWrongImageShape) {
  Network<float> net(NetworkConfig::desk());
  EXPECT_THROW(net.logits(Tensor({27, 28, 1})), ConfigError);
}

TEST(Network, ZetaInitRanges) {
  auto cfg = NetworkConfig::desk();
  cfg.zeta_range = 0.05;
  Network<double> net(cfg);
  for (double z : net.find_parameter("conv1.zeta")->value.data()) EXPECT_LE(std::abs(z), 0.05);
  cfg.zeta_init = ZetaInit::Frequency;
  Network<double> fnet(cfg);
  double lo = 1, hi = -1;
  for (double z : fnet.find_parameter("conv2.zeta")->value.data()) {
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  // f_res in [1, 2] GHz against a 1.5 GHz carrier.
  EXPECT_GE(lo, -1.0 / 3 - 1e-12);
  EXPECT_LE(hi, 1.0 / 3 + 1e-12);
  EXPECT_LT(lo, -0.25);
  EXPECT_GT(hi, 0.25);
}

TEST(Network, CalibrationSetsOperatingPoint) {
  Rng rng(5);
  Network<double> net(NetworkConfig::scaled(4, 8));
  std::vector<T64> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_tensor(rng, {28, 28, 1}, 0, 1));
  ASSERT_FALSE(net.calibrated());
  net.calibrate(batch);
  EXPECT_TRUE(net.calibrated());

  // Median positive oscillator current is 5 mA; logits have unit spread.
  std::vector<double> currents, logits;
  const double g = net.find_parameter("osc1.i_gain")->value[0];
  for (const auto& img : batch) {
    Tape64 tape;
    std::vector<Var> outs;
    net.forward(tape, tape.constant(img), false, &outs);
    for (double u : tape.value(outs[1]).data())
      if (u > 0) currents.push_back(g * u);
    for (double v : tape.value(outs.back()).data()) logits.push_back(v);
  }
  std::sort(currents.begin(), currents.end());
  EXPECT_NEAR(currents[(currents.size() - 1) / 2], 5.0, 1e-9);
  double mean = 0, sq = 0;
  for (double v : logits) mean += v;
  mean /= logits.size();
  for (double v : logits) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(std::sqrt(sq / logits.size()), 1.0, 1e-9);
}
