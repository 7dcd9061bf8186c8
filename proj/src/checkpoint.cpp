#include "rfsnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "rfsnn/mnist_io.hpp"

namespace rfsnn {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n)
      throw FormatError(std::string("checkpoint: truncated while reading ") +
                        what + " (need " + std::to_string(n) + " bytes at offset " +
                        std::to_string(pos_) + ", " +
                        std::to_string(b_.size() - pos_) + " left)");
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return b_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> raw(std::size_t n, const char* what) {
    need(n, what);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.value;
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u8(kCheckpointVersion);
  w.str(ckpt.config.dump());
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (auto e : t.value.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (float f : t.value.data()) w.f32(f);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.raw(sizeof kCheckpointMagic, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw FormatError("checkpoint: bad magic (not an RFSNN checkpoint)");
  const std::uint8_t version = r.u8("version");
  if (version != kCheckpointVersion)
    throw UnsupportedVersionError("checkpoint: unsupported format version " +
                                  std::to_string(version) + " (this build reads " +
                                  std::to_string(kCheckpointVersion) + ")");
  Checkpoint ckpt;
  const std::string blob = r.str("config");
  try {
    ckpt.config = nlohmann::json::parse(blob);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint: config blob is not JSON: ") +
                      e.what());
  }
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name = r.str("tensor name");
    const std::uint32_t rank = r.u32("tensor rank");
    Shape shape;
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(r.u32("tensor extent"));
      if (shape.back() == 0)
        throw FormatError("checkpoint: zero extent in tensor " + nt.name);
      n *= shape.back();
    }
    r.need(4 * n, "tensor payload");
    std::vector<float> data(n);
    for (auto& f : data) f = r.f32("tensor payload");
    nt.value = Tensor(std::move(shape), std::move(data));
    ckpt.tensors.push_back(std::move(nt));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes after last tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_checkpoint(bytes);
}

}  // namespace rfsnn
