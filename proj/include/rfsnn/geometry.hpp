#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "rfsnn/errors.hpp"

namespace rfsnn {

struct Extent2D {
  std::size_t height = 0;
  std::size_t width = 0;
  friend bool operator==(const Extent2D&, const Extent2D&) = default;
};

/// Output extent of a sliding window: (n + 2*pad - k) / stride + 1 along
/// each axis. The division must be exact and the result positive.
inline Extent2D output_shape(std::size_t height, std::size_t width,
                             std::size_t k, std::size_t stride,
                             std::size_t pad) {
  auto axis = [&](std::size_t n, const char* name) {
    if (k == 0 || stride == 0)
      throw ConfigError("output_shape: kernel and stride must be positive");
    const std::size_t padded = n + 2 * pad;
    if (padded < k)
      throw ConfigError(std::string("output_shape: kernel larger than padded ") +
                        name + " (" + std::to_string(padded) + " < " +
                        std::to_string(k) + ")");
    if ((padded - k) % stride != 0)
      throw ConfigError(std::string("output_shape: non-integral output ") +
                        name + " for extent " + std::to_string(n) +
                        ", kernel " + std::to_string(k) + ", stride " +
                        std::to_string(stride) + ", padding " +
                        std::to_string(pad));
    return (padded - k) / stride + 1;
  };
  return {axis(height, "height"), axis(width, "width")};
}

/// Max-pool 2x2/2 output extent; trailing odd rows/columns are dropped.
inline Extent2D pool_output_shape(std::size_t height, std::size_t width) {
  if (height < 2 || width < 2)
    throw ConfigError("maxpool2x2: input extent below 2x2");
  return {height / 2, width / 2};
}

}  // namespace rfsnn
