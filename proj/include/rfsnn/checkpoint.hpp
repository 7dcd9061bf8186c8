#pragma once

// Checkpoint file, all integers little-endian:
//
//   "RFSNN"            5 bytes
//   version            u8 (= 1)
//   config length      u32, then that many bytes of UTF-8 JSON
//   tensor count       u32
//   per tensor:
//     name length      u32, then UTF-8 name
//     rank             u32
//     extents          rank x u32
//     payload          product(extents) x IEEE-754 binary32

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfsnn/tensor.hpp"

namespace rfsnn {

inline constexpr char kCheckpointMagic[5] = {'R', 'F', 'S', 'N', 'N'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  nlohmann::json config;
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on bad magic or truncation, UnsupportedVersionError
/// on an unknown version byte.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rfsnn
