#include "qamatch/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "qamatch/error.hpp"

namespace qamatch {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'Q', 'A', 'M', '1'};
constexpr std::uint32_t kMaxDimension = 1u << 24;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("model file is truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const MlpClassifier& model) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  const auto& dims = model.layer_dims();
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (const auto& layer : model.layers()) {
    for (double w : layer.weights.data) put_f64(out, w);
    for (double b : layer.bias) put_f64(out, b);
  }
  return out;
}

MlpClassifier deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw FormatError("bad magic bytes: not a QAM1 model file");
  const auto count = in.u32();
  if (count < 2 || count > 64) throw FormatError("implausible layer count " + std::to_string(count));
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto d = in.u32();
    if (d == 0 || d > kMaxDimension) throw FormatError("implausible layer dimension " + std::to_string(d));
    dims.push_back(d);
  }
  std::uint64_t params = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) params += static_cast<std::uint64_t>(dims[l + 1]) * (dims[l] + 1);
  if (params * 8 != in.remaining()) {
    throw FormatError(params * 8 > in.remaining() ? "model file is truncated" : "trailing bytes after model parameters");
  }
  MlpClassifier model(dims);
  for (auto& layer : model.layers()) {
    for (double& w : layer.weights.data) w = in.f64();
    for (double& b : layer.bias) b = in.f64();
  }
  if (!in.done()) throw FormatError("trailing bytes after model parameters");
  return model;
}

void save_model(const MlpClassifier& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

MlpClassifier load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace qamatch
