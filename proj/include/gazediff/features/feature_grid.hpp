#pragma once

// Conditioning feature grids and the GZFG container:
//   "GZFG" u32 version=1 u32 H' u32 W' u32 D u8 dtype(0=f32)
//   u16 id_len, id bytes (UTF-8), H'*W'*D f32 row-major (y, x, channel)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gazediff/core/binary_io.hpp"
#include "gazediff/core/errors.hpp"

namespace gazediff {

struct FeatureGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t depth = 0;
  std::vector<float> values;
  std::string stimulus_id;

  FeatureGrid() = default;
  FeatureGrid(std::size_t h, std::size_t w, std::size_t d, std::string id = {})
      : height(h), width(w), depth(d), values(h * w * d, 0.f), stimulus_id(std::move(id)) {}

  std::size_t cells() const { return height * width; }
  float& at(std::size_t y, std::size_t x, std::size_t c) { return values[(y * width + x) * depth + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const { return values[(y * width + x) * depth + c]; }
  const float* cell(std::size_t y, std::size_t x) const { return values.data() + (y * width + x) * depth; }

  bool all_finite() const {
    for (float v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline constexpr std::uint32_t kFeatureGridVersion = 1;

inline std::vector<std::uint8_t> encode_grid(const FeatureGrid& g) {
  if (g.values.size() != g.height * g.width * g.depth) throw DimensionError("feature grid: value count mismatch");
  io::ByteWriter w;
  w.put_bytes("GZFG");
  w.put<std::uint32_t>(kFeatureGridVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.depth));
  w.put<std::uint8_t>(0);
  w.put_string16(g.stimulus_id);
  w.put_array(std::span<const float>(g.values));
  return w.bytes();
}

inline FeatureGrid decode_grid(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (r.get_bytes(4) != "GZFG") throw FormatError("feature grid: bad magic");
  if (const auto v = r.get<std::uint32_t>(); v != kFeatureGridVersion)
    throw FormatError("feature grid: unsupported version " + std::to_string(v));
  FeatureGrid g;
  g.height = r.get<std::uint32_t>();
  g.width = r.get<std::uint32_t>();
  g.depth = r.get<std::uint32_t>();
  if (const auto dtype = r.get<std::uint8_t>(); dtype != 0)
    throw FormatError("feature grid: unsupported dtype " + std::to_string(dtype));
  g.stimulus_id = r.get_string16();
  g.values = r.get_array<float>(g.height * g.width * g.depth);
  if (!r.done()) throw FormatError("feature grid: trailing bytes");
  if (!g.all_finite()) throw DataError("feature grid " + g.stimulus_id + ": non-finite value");
  return g;
}

inline void save_grid(const std::string& path, const FeatureGrid& g) { io::write_file(path, encode_grid(g)); }

/// Loads raw stored values; see standardize() for the model-side normalization.
inline FeatureGrid load_grid(const std::string& path) { return decode_grid(io::read_file(path)); }

/// Zero mean, unit variance over all cells and channels. Constant grids are only centered.
inline FeatureGrid standardize(FeatureGrid g) {
  if (g.values.empty()) return g;
  double mean = 0;
  for (float v : g.values) mean += v;
  mean /= double(g.values.size());
  double var = 0;
  for (float v : g.values) var += (v - mean) * (v - mean);
  var /= double(g.values.size());
  const double inv = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
  for (float& v : g.values) v = float((v - mean) * inv);
  return g;
}

/// Corner-aligned bilinear resampling of an H x W x D channels-last array.
template <class T>
std::vector<T> resample_bilinear(const std::vector<T>& src, std::size_t h, std::size_t w, std::size_t d,
                                 std::size_t th, std::size_t tw) {
  if (th == 0 || tw == 0) throw DimensionError("resample: target dims must be >= 1");
  auto coord = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
    if (n_out == 1) return (double(n_in) - 1.0) / 2.0;
    return double(i) * (double(n_in) - 1.0) / (double(n_out) - 1.0);
  };
  std::vector<T> out(th * tw * d);
  for (std::size_t y = 0; y < th; ++y) {
    const double sy = coord(y, th, h);
    const std::size_t y0 = std::min(std::size_t(std::floor(sy)), h - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - double(y0);
    for (std::size_t x = 0; x < tw; ++x) {
      const double sx = coord(x, tw, w);
      const std::size_t x0 = std::min(std::size_t(std::floor(sx)), w - 1);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - double(x0);
      const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx, w10 = fy * (1 - fx), w11 = fy * fx;
      for (std::size_t c = 0; c < d; ++c) {
        out[(y * tw + x) * d + c] =
            T(w00 * double(src[(y0 * w + x0) * d + c]) + w01 * double(src[(y0 * w + x1) * d + c]) +
              w10 * double(src[(y1 * w + x0) * d + c]) + w11 * double(src[(y1 * w + x1) * d + c]));
      }
    }
  }
  return out;
}

inline FeatureGrid resample_grid(const FeatureGrid& g, std::size_t target_h, std::size_t target_w) {
  if (target_h == g.height && target_w == g.width) return g;
  FeatureGrid out(target_h, target_w, g.depth, g.stimulus_id);
  out.values = resample_bilinear(g.values, g.height, g.width, g.depth, target_h, target_w);
  return out;
}

/// Gaussian blob for synthetic grids. Center and sigma are relative to the frame ([0,1]).
struct Blob {
  double cx = 0.5;
  double cy = 0.5;
  double sigma = 0.1;
  std::size_t signature = 0;  // channel index of the blob's unit signature vector
  double amplitude = 1.0;
};

/// Deterministic grid: each blob adds amplitude * gaussian(cell) * e_signature.
/// Signatures are standard basis vectors, so distinct signatures are orthonormal.
inline FeatureGrid synth_grid(const std::vector<Blob>& blobs, std::size_t h, std::size_t w, std::size_t d,
                              std::string stimulus_id = {}) {
  std::vector<std::size_t> distinct;
  for (const Blob& b : blobs) {
    if (b.cx < 0 || b.cx > 1 || b.cy < 0 || b.cy > 1) throw std::invalid_argument("synth_grid: blob center outside [0,1]^2");
    if (std::find(distinct.begin(), distinct.end(), b.signature) == distinct.end()) distinct.push_back(b.signature);
  }
  if (distinct.size() > d) throw std::length_error("synth_grid: more distinct signatures than feature depth");
  for (std::size_t s : distinct)
    if (s >= d) throw std::length_error("synth_grid: signature index exceeds feature depth");
  FeatureGrid g(h, w, d, std::move(stimulus_id));
  for (std::size_t y = 0; y < h; ++y) {
    const double ry = h == 1 ? 0.5 : double(y) / double(h - 1);
    for (std::size_t x = 0; x < w; ++x) {
      const double rx = w == 1 ? 0.5 : double(x) / double(w - 1);
      for (const Blob& b : blobs) {
        const double r2 = (rx - b.cx) * (rx - b.cx) + (ry - b.cy) * (ry - b.cy);
        g.at(y, x, b.signature) += float(b.amplitude * std::exp(-0.5 * r2 / (b.sigma * b.sigma)));
      }
    }
  }
  return g;
}

}  // namespace gazediff
