#pragma once

// MNIST in the IDX binary format (pre-decompressed; gzip is not handled).
//
//   u32 BE magic   0x00000803 (u8 images, 3 dims) | 0x00000801 (u8 labels, 1 dim)
//   u32 BE extent  one per dimension
//   u8 payload     product(extents) bytes, row-major

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rfsnn/rng.hpp"
#include "rfsnn/tensor.hpp"

namespace rfsnn {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxHeader {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;

  std::size_t header_bytes() const { return 4 + 4 * dims.size(); }
  std::size_t payload_bytes() const;
  friend bool operator==(const IdxHeader&, const IdxHeader&) = default;
};

struct IdxView {
  IdxHeader header;
  std::span<const std::uint8_t> payload;
};

/// Validates magic, extents and payload length. Throws FormatError.
IdxView parse_idx(std::span<const std::uint8_t> bytes);

/// Big-endian header bytes for `h`.
std::vector<std::uint8_t> serialize_idx_header(const IdxHeader& h);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> images;  // [N, rows, cols]
  std::vector<std::uint8_t> labels;  // [N]

  std::size_t size() const { return labels.size(); }

  /// Pixel intensities mapped to RF powers value/255 uW, shape [rows, cols, 1].
  template <std::floating_point T>
  BasicTensor<T> image(std::size_t index) const;

  /// First n samples (all if n == 0 or n >= size()).
  Dataset head(std::size_t n) const;
};

/// Loads an images/labels pair. Throws FormatError on a bad magic (e.g.
/// swapped files), truncation or a count mismatch.
Dataset load_dataset(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path);

/// Canonical file names inside `dir`.
Dataset load_mnist_train(const std::filesystem::path& dir);
Dataset load_mnist_test(const std::filesystem::path& dir);

template <std::floating_point T>
constexpr T normalize_pixel(std::uint8_t v) {
  return static_cast<T>(v) / static_cast<T>(255);
}

/// Deterministic shuffled batches. The order of epoch e is a Fisher-Yates
/// shuffle of 0..n-1 driven by Rng(derive_seed(seed, "epoch:<e>")).
class BatchIterator {
 public:
  BatchIterator(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                std::size_t epoch = 0);

  /// Next batch of sample indices; the last one may be short.
  std::optional<std::vector<std::size_t>> next();

  std::size_t batches_per_epoch() const;
  std::size_t position() const { return cursor_; }
  /// Skips to sample offset `cursor` (a multiple of batch_size).
  void seek(std::size_t cursor);

  const std::vector<std::size_t>& order() const { return order_; }

 private:
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::size_t epoch);

}  // namespace rfsnn
