#include <gtest/gtest.h>

#include <fstream>

#include "rfsnn/training.hpp"
#include "test_support.hpp"

using namespace rfsnn;
using rfsnn::test::synthetic_dataset;
using rfsnn::test::tmp_path;

namespace {

Checkpoint small_checkpoint() {
  Checkpoint c;
  c.config = {{"note", "x"}, {"n", 3}};
  Tensor a({2, 3});
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5f * static_cast<float>(i) - 1.0f;
  Tensor b({1});
  b[0] = -0.0f;
  c.tensors = {{"a", a}, {"b.bias", b}};
  return c;
}

Trainer<float> trained_desk(const Dataset& data, std::size_t steps) {
  TrainConfig tc = TrainConfig::for_preset(Preset::Desk);
  tc.batch_size = 4;
  Trainer<float> trainer(NetworkConfig::desk(), tc);
  for (std::size_t s = 0; s < steps; ++s) trainer.step(data);
  return trainer;
}

}  // namespace

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  const Checkpoint c = small_checkpoint();
  const auto bytes = encode_checkpoint(c);
  ASSERT_GE(bytes.size(), 6u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "RFSNN");
  EXPECT_EQ(bytes[5], kCheckpointVersion);
  const Checkpoint d = decode_checkpoint(bytes);
  EXPECT_EQ(d.config, c.config);
  EXPECT_EQ(d.tensors, c.tensors);
  EXPECT_TRUE(std::signbit(d.find("b.bias")->operator[](0)));
  EXPECT_EQ(d.find("missing"), nullptr);
  EXPECT_EQ(encode_checkpoint(d), bytes);
}

TEST(Checkpoint, CorruptionIsRejected) {
  const auto bytes = encode_checkpoint(small_checkpoint());
  for (std::size_t cut : {0ul, 4ul, 6ul, 9ul, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_checkpoint(t), FormatError) << "cut at " << cut;
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);

  auto bumped = bytes;
  bumped[5] = kCheckpointVersion + 1;
  EXPECT_THROW(decode_checkpoint(bumped), UnsupportedVersionError);

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);

  EXPECT_THROW(load_checkpoint(tmp_path("does-not-exist.ckpt")), FormatError);
}

TEST(Checkpoint, TrainedNetworkLogitsAreBitIdentical) {
  const Dataset data = synthetic_dataset(24, 3);
  Trainer<float> trainer = trained_desk(data, 3);
  const auto path = tmp_path("logits.ckpt");
  save_checkpoint(path, trainer.checkpoint());
  auto restored = network_from_checkpoint<float>(load_checkpoint(path));
  EXPECT_TRUE(restored.calibrated());
  for (std::size_t s = 0; s < 4; ++s) {
    const Tensor img = data.image<float>(s);
    const Tensor a = trainer.network().logits(img);
    const Tensor b = restored.logits(img);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(a[i]), std::bit_cast<std::uint32_t>(b[i]));
  }
}

TEST(Checkpoint, StoresConfigAndOptimizerState) {
  const Dataset data = synthetic_dataset(24, 4);
  Trainer<float> trainer = trained_desk(data, 2);
  const Checkpoint c = trainer.checkpoint();
  EXPECT_TRUE(c.config.contains("network"));
  EXPECT_TRUE(c.config.contains("train"));
  EXPECT_EQ(network_config_from_json(c.config.at("network")), trainer.network().config());
  for (auto* p : trainer.network().parameters()) {
    ASSERT_NE(c.find(p->name), nullptr) << p->name;
    EXPECT_EQ(c.find(p->name)->shape(), p->value.shape());
    EXPECT_NE(c.find("adam.m:" + p->name), nullptr);
    EXPECT_NE(c.find("adam.v:" + p->name), nullptr);
  }
}
