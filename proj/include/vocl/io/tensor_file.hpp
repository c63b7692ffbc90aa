#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

#include <zlib.h>

#include "vocl/ad/var.hpp"
#include "vocl/core/config.hpp"
#include "vocl/core/error.hpp"

// Binary tensor archive shared by clips, feature dumps and checkpoints.
//
//   magic    8 bytes  "VOCLTNS\0"
//   version  u32
//   count    u32      number of tensors
//   body_len u64
//   crc32    u32      over the body
//   body:    u32 meta_len, meta JSON bytes,
//            per tensor: u16 name_len, name, u8 dtype, u8 rank, u32 dims[rank], raw payload
//
// All integers and payloads are little-endian.

namespace vocl::io {

static_assert(std::endian::native == std::endian::little, "tensor archives assume a little-endian host");

inline constexpr char kMagic[8] = {'V', 'O', 'C', 'L', 'T', 'N', 'S', '\0'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 8 + 4;

enum class DType : std::uint8_t { f64 = 0, f32 = 1, i32 = 2, u8 = 3 };

inline std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f64: return 8;
    case DType::f32: return 4;
    case DType::i32: return 4;
    case DType::u8: return 1;
  }
  throw FormatError("unknown dtype");
}

struct TensorEntry {
  std::string name;
  DType dtype = DType::f64;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t numel() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  template <class T>
  std::vector<T> as() const {
    if (data.size() != numel() * sizeof(T) || dtype_size(dtype) != sizeof(T))
      throw FormatError("tensor '" + name + "' has unexpected element type");
    std::vector<T> out(numel());
    std::memcpy(out.data(), data.data(), data.size());
    return out;
  }
};

template <class T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, double>) return DType::f64;
  else if constexpr (std::is_same_v<T, float>) return DType::f32;
  else if constexpr (std::is_same_v<T, std::int32_t>) return DType::i32;
  else {
    static_assert(std::is_same_v<T, std::uint8_t>);
    return DType::u8;
  }
}

template <class T>
TensorEntry make_entry(std::string name, std::vector<std::uint32_t> dims, const std::vector<T>& values) {
  TensorEntry e{std::move(name), dtype_of<T>(), std::move(dims), {}};
  if (e.numel() != values.size()) throw ShapeError("tensor '" + e.name + "': dims do not match value count");
  e.data.resize(values.size() * sizeof(T));
  std::memcpy(e.data.data(), values.data(), e.data.size());
  return e;
}

inline TensorEntry matrix_entry(std::string name, const Matrix& m) {
  std::vector<double> v(m.data(), m.data() + m.size());
  return make_entry(std::move(name), {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, v);
}

inline Matrix entry_matrix(const TensorEntry& e) {
  if (e.dims.size() != 2) throw FormatError("tensor '" + e.name + "' is not a matrix");
  const auto v = e.as<double>();
  Matrix m(e.dims[0], e.dims[1]);
  std::memcpy(m.data(), v.data(), v.size() * sizeof(double));
  return m;
}

struct TensorArchive {
  Json meta = Json::object();
  std::vector<TensorEntry> tensors;

  const TensorEntry* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  const TensorEntry& at(const std::string& name) const {
    if (const auto* t = find(name)) return *t;
    throw FormatError("archive has no tensor '" + name + "'");
  }
};

namespace detail {

template <class T>
void put(std::vector<std::uint8_t>& buf, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> v(data_ + pos_, data_ + pos_ + n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw FormatError("archive body is inconsistent with its table");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc(const std::vector<std::uint8_t>& body) {
  return static_cast<std::uint32_t>(crc32(0L, body.data(), static_cast<uInt>(body.size())));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const TensorArchive& a) {
  std::vector<std::uint8_t> body;
  const std::string meta = a.meta.dump();
  detail::put<std::uint32_t>(body, static_cast<std::uint32_t>(meta.size()));
  body.insert(body.end(), meta.begin(), meta.end());
  for (const auto& t : a.tensors) {
    if (t.data.size() != t.numel() * dtype_size(t.dtype)) throw FormatError("tensor '" + t.name + "' payload size");
    detail::put<std::uint16_t>(body, static_cast<std::uint16_t>(t.name.size()));
    body.insert(body.end(), t.name.begin(), t.name.end());
    detail::put<std::uint8_t>(body, static_cast<std::uint8_t>(t.dtype));
    detail::put<std::uint8_t>(body, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) detail::put<std::uint32_t>(body, d);
    body.insert(body.end(), t.data.begin(), t.data.end());
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  detail::put<std::uint32_t>(out, kFormatVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(a.tensors.size()));
  detail::put<std::uint64_t>(out, body.size());
  detail::put<std::uint32_t>(out, detail::crc(body));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline TensorArchive decode(const std::vector<std::uint8_t>& bytes, const std::string& origin = "archive") {
  if (bytes.size() < kHeaderSize) throw TruncatedFileError(origin + ": file shorter than header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError(origin + ": bad magic");
  detail::Reader head(bytes.data() + 8, kHeaderSize - 8);
  const auto version = head.get<std::uint32_t>();
  const auto count = head.get<std::uint32_t>();
  const auto body_len = head.get<std::uint64_t>();
  const auto checksum = head.get<std::uint32_t>();
  if (version != kFormatVersion)
    throw VersionMismatchError(origin + ": format version " + std::to_string(version) + ", expected " +
                               std::to_string(kFormatVersion));
  if (bytes.size() - kHeaderSize < body_len)
    throw TruncatedFileError(origin + ": body has " + std::to_string(bytes.size() - kHeaderSize) + " of " +
                             std::to_string(body_len) + " bytes");
  std::vector<std::uint8_t> body(bytes.begin() + kHeaderSize, bytes.begin() + kHeaderSize + body_len);
  if (detail::crc(body) != checksum) throw ChecksumError(origin + ": checksum mismatch");

  TensorArchive a;
  detail::Reader r(body.data(), body.size());
  const auto meta_len = r.get<std::uint32_t>();
  a.meta = Json::parse(r.str(meta_len), nullptr, false);
  if (a.meta.is_discarded()) throw FormatError(origin + ": metadata is not JSON");
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorEntry t;
    t.name = r.str(r.get<std::uint16_t>());
    const auto dt = r.get<std::uint8_t>();
    if (dt > 3) throw FormatError(origin + ": unknown dtype");
    t.dtype = static_cast<DType>(dt);
    const auto rank = r.get<std::uint8_t>();
    for (int k = 0; k < rank; ++k) t.dims.push_back(r.get<std::uint32_t>());
    t.data = r.bytes(t.numel() * dtype_size(t.dtype));
    a.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw FormatError(origin + ": trailing bytes in body");
  return a;
}

inline void write_archive(const std::filesystem::path& path, const TensorArchive& a) {
  const auto bytes = encode(a);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

inline TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes, path.string());
}

}  // namespace vocl::io
