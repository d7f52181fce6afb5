#include "psc/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "psc/errors.hpp"

namespace psc {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'C', 'T', 'N', 'S', 'R', '1'};
constexpr std::uint8_t kFloat64 = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t u64() { return read_le(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read_le(4)); }
  std::uint8_t u8() { return static_cast<std::uint8_t>(read_le(1)); }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t size() const { return bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("tensor container truncated");
  }
  std::uint64_t read_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tensors(const NamedTensors& tensors) {
  std::size_t manifest_size = sizeof(kMagic) + 8;
  for (const auto& [name, t] : tensors) manifest_size += 4 + name.size() + 1 + 1 + 8 * t.rank() + 8;

  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, tensors.size());
  std::uint64_t offset = manifest_size;
  for (const auto& [name, t] : tensors) {
    if (t.rank() > 255) throw DimensionError("tensor rank too large to serialize");
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    out.push_back(static_cast<char>(kFloat64));
    out.push_back(static_cast<char>(t.rank()));
    for (auto d : t.shape()) put_u64(out, d);
    put_u64(out, offset);
    offset += 8 * t.numel();
  }
  for (const auto& entry : tensors) {
    for (double v : entry.second.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

NamedTensors decode_tensors(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw DataError("not a tensor container (bad magic)");
  }
  const std::uint64_t count = r.u64();
  struct Meta {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<Meta> metas;
  for (std::uint64_t i = 0; i < count; ++i) {
    Meta m;
    const auto len = r.u32();
    m.name = std::string(r.take(len));
    if (r.u8() != kFloat64) throw DataError("unsupported element type for tensor '" + m.name + "'");
    const auto rank = r.u8();
    for (std::uint8_t k = 0; k < rank; ++k) m.shape.push_back(static_cast<std::size_t>(r.u64()));
    m.offset = r.u64();
    metas.push_back(std::move(m));
  }
  NamedTensors out;
  for (const auto& m : metas) {
    const std::size_t n = shape_numel(m.shape);
    if (m.offset + 8 * n > bytes.size()) throw DataError("tensor '" + m.name + "' extends past end of container");
    Reader data(bytes.substr(static_cast<std::size_t>(m.offset), 8 * n));
    std::vector<double> values(n);
    for (auto& v : values) v = std::bit_cast<double>(data.u64());
    out.emplace_back(m.name, Tensor(m.shape, std::move(values)));
  }
  return out;
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  const std::string bytes = encode_tensors(tensors);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write tensor container " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing tensor container " + path.string());
}

NamedTensors load_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open tensor container " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_tensors(bytes);
}

const Tensor& find_tensor(const NamedTensors& tensors, std::string_view name) {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("tensor '" + std::string(name) + "' not found in container");
}

}  // namespace psc
