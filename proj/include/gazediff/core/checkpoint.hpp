#pragma once

// Parameter checkpoint container, little-endian:
//   "GZCK" u32 version=1 u32 count
//   count x { u32 name_len, name bytes, u8 dtype (0=f32, 1=f64), u32 rank, rank x u64 dim, raw data }

#include <cstdint>
#include <string>
#include <type_traits>

#include "gazediff/core/binary_io.hpp"
#include "gazediff/core/parameters.hpp"

namespace gazediff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
std::vector<std::uint8_t> encode_checkpoint(const ParameterStore<T>& store) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  io::ByteWriter w;
  w.put_bytes("GZCK");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.count()));
  for (const auto& [name, t] : store.entries()) {
    w.put_string32(name);
    w.put<std::uint8_t>(std::is_same_v<T, float> ? 0 : 1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) w.put<std::uint64_t>(d);
    w.put_array(std::span<const T>(t.data));
  }
  return w.bytes();
}

/// Decodes a checkpoint; stored f32/f64 data is converted to T.
template <class T>
ParameterStore<T> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (r.get_bytes(4) != "GZCK") throw FormatError("checkpoint: bad magic");
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(v));
  const auto count = r.get<std::uint32_t>();
  ParameterStore<T> store;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string32();
    const auto dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint32_t>();
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    const std::size_t n = numel(shape);
    Tensor<T> t(shape);
    if (dtype == 0) {
      auto raw = r.get_array<float>(n);
      t.data.assign(raw.begin(), raw.end());
    } else if (dtype == 1) {
      auto raw = r.get_array<double>(n);
      t.data.assign(raw.begin(), raw.end());
    } else {
      throw FormatError("checkpoint: unknown dtype tag " + std::to_string(dtype));
    }
    store.add(name, std::move(t));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return store;
}

template <class T>
void save_checkpoint(const std::string& path, const ParameterStore<T>& store) {
  io::write_file(path, encode_checkpoint(store));
}

template <class T>
ParameterStore<T> load_checkpoint(const std::string& path) {
  const auto bytes = io::read_file(path);
  return decode_checkpoint<T>(bytes);
}

}  // namespace gazediff
