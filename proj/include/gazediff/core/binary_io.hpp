#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "gazediff/core/errors.hpp"

namespace gazediff::io {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

/// Append-only little-endian byte buffer.
class ByteWriter {
 public:
  template <class U>
  void put(U v) {
    static_assert(std::is_trivially_copyable_v<U>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(U));
  }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  template <class U>
  void put_array(std::span<const U> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
  }
  void put_string16(std::string_view s) {
    if (s.size() > 0xFFFF) throw FormatError("string too long for u16 length prefix");
    put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    put_bytes(s);
  }
  void put_string32(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked reader over a byte buffer; every overrun is a FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class U>
  U get() {
    U v;
    std::memcpy(&v, take(sizeof(U)), sizeof(U));
    return v;
  }
  std::string get_bytes(std::size_t n) {
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  template <class U>
  std::vector<U> get_array(std::size_t count) {
    if (count > remaining() / sizeof(U)) throw FormatError("truncated payload");
    std::vector<U> out(count);
    std::memcpy(out.data(), take(count * sizeof(U)), count * sizeof(U));
    return out;
  }
  std::string get_string16() { return get_bytes(get<std::uint16_t>()); }
  std::string get_string32() { return get_bytes(get<std::uint32_t>()); }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (n > remaining()) throw FormatError("truncated payload");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace gazediff::io
