#include "rfsnn/mnist_io.hpp"

#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>

namespace rfsnn {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

std::size_t IdxHeader::payload_bytes() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

IdxView parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4)
    throw FormatError("idx: truncated header: expected at least 4 bytes, got " +
                      std::to_string(bytes.size()));
  IdxHeader h;
  h.magic = read_be32(bytes, 0);
  std::size_t ndims = 0;
  if (h.magic == kIdxImagesMagic)
    ndims = 3;
  else if (h.magic == kIdxLabelsMagic)
    ndims = 1;
  else
    throw FormatError("idx: unsupported magic " + hex32(h.magic) +
                      " (expected 0x00000803 images or 0x00000801 labels)");
  const std::size_t header_len = 4 + 4 * ndims;
  if (bytes.size() < header_len)
    throw FormatError("idx: truncated header: expected " +
                      std::to_string(header_len) + " bytes, got " +
                      std::to_string(bytes.size()));
  for (std::size_t d = 0; d < ndims; ++d)
    h.dims.push_back(read_be32(bytes, 4 + 4 * d));
  const std::size_t expected = h.payload_bytes();
  const std::size_t actual = bytes.size() - header_len;
  if (actual < expected)
    throw FormatError("idx: truncated payload: expected " +
                      std::to_string(expected) + " bytes, got " +
                      std::to_string(actual));
  if (actual > expected)
    throw FormatError("idx: " + std::to_string(actual - expected) +
                      " trailing bytes after the " + std::to_string(expected) +
                      "-byte payload");
  return {std::move(h), bytes.subspan(header_len)};
}

std::vector<std::uint8_t> serialize_idx_header(const IdxHeader& h) {
  std::vector<std::uint8_t> out;
  auto put = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  };
  put(h.magic);
  for (auto d : h.dims) put(d);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <std::floating_point T>
BasicTensor<T> Dataset::image(std::size_t index) const {
  const std::size_t px = rows * cols;
  BasicTensor<T> t({rows, cols, 1});
  const std::uint8_t* src = images.data() + index * px;
  for (std::size_t i = 0; i < px; ++i) t[i] = normalize_pixel<T>(src[i]);
  return t;
}

template BasicTensor<float> Dataset::image<float>(std::size_t) const;
template BasicTensor<double> Dataset::image<double>(std::size_t) const;

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  Dataset d;
  d.rows = rows;
  d.cols = cols;
  d.images.assign(images.begin(), images.begin() + n * rows * cols);
  d.labels.assign(labels.begin(), labels.begin() + n);
  return d;
}

Dataset load_dataset(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
  const auto image_bytes = read_file_bytes(images_path);
  const auto label_bytes = read_file_bytes(labels_path);
  const IdxView iv = parse_idx(image_bytes);
  const IdxView lv = parse_idx(label_bytes);
  if (iv.header.magic != kIdxImagesMagic)
    throw FormatError(images_path.string() + ": expected an image file (magic "
                      "0x00000803), found a label file");
  if (lv.header.magic != kIdxLabelsMagic)
    throw FormatError(labels_path.string() + ": expected a label file (magic "
                      "0x00000801), found an image file");
  if (iv.header.dims[0] != lv.header.dims[0])
    throw FormatError("image count " + std::to_string(iv.header.dims[0]) +
                      " differs from label count " +
                      std::to_string(lv.header.dims[0]));
  Dataset d;
  d.rows = iv.header.dims[1];
  d.cols = iv.header.dims[2];
  if (d.rows == 0 || d.cols == 0) throw FormatError("idx: zero image extent");
  d.images.assign(iv.payload.begin(), iv.payload.end());
  d.labels.assign(lv.payload.begin(), lv.payload.end());
  for (std::size_t i = 0; i < d.labels.size(); ++i)
    if (d.labels[i] > 9)
      throw FormatError("label " + std::to_string(d.labels[i]) + " at index " +
                        std::to_string(i) + " outside [0, 9]");
  return d;
}

Dataset load_mnist_train(const std::filesystem::path& dir) {
  return load_dataset(dir / "train-images-idx3-ubyte",
                      dir / "train-labels-idx1-ubyte");
}

Dataset load_mnist_test(const std::filesystem::path& dir) {
  return load_dataset(dir / "t10k-images-idx3-ubyte",
                      dir / "t10k-labels-idx1-ubyte");
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "epoch:" + std::to_string(epoch)));
  shuffle(std::span<std::size_t>(order), rng);
  return order;
}

BatchIterator::BatchIterator(std::size_t n, std::size_t batch_size,
                             std::uint64_t seed, std::size_t epoch)
    : batch_size_(batch_size), order_(epoch_permutation(n, seed, epoch)) {
  if (batch_size == 0) throw ConfigError("batches: batch_size must be >= 1");
}

std::optional<std::vector<std::size_t>> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> batch(order_.begin() + cursor_, order_.begin() + end);
  cursor_ = end;
  return batch;
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

void BatchIterator::seek(std::size_t cursor) {
  if (cursor > order_.size())
    throw ConfigError("batches: seek past the end of the epoch");
  cursor_ = cursor;
}

}  // namespace rfsnn
