#pragma once

// Fixation-density saliency maps. Files: grayscale PFM ("Pf", little-endian,
// rows bottom to top as the format requires) and an 8-bit PGM preview.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gazediff/core/binary_io.hpp"
#include "gazediff/core/errors.hpp"
#include "gazediff/events/fixations.hpp"

namespace gazediff {

struct SaliencyMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major

  SaliencyMap() = default;
  SaliencyMap(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}

  double& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  std::size_t size() const { return values.size(); }
};

/// Fixation pixel (row, col), rounded and clamped into the frame.
inline std::pair<std::size_t, std::size_t> fixation_pixel(double x, double y, std::size_t height, std::size_t width) {
  const auto clamp_round = [](double v, std::size_t n) {
    return std::size_t(std::clamp(std::llround(v), 0LL, static_cast<long long>(n) - 1));
  };
  return {clamp_round(y, height), clamp_round(x, width)};
}

inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("gaussian sigma must be positive");
  const auto radius = std::size_t(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double d = double(i) - double(radius);
    sum += k[i] = std::exp(-0.5 * d * d / (sigma * sigma));
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable isotropic Gaussian with zero padding outside the frame.
inline SaliencyMap gaussian_blur(const SaliencyMap& in, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const std::ptrdiff_t r = std::ptrdiff_t(k.size() / 2), h = std::ptrdiff_t(in.height), w = std::ptrdiff_t(in.width);
  SaliencyMap tmp(in.height, in.width), out(in.height, in.width);
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double v = in.values[std::size_t(y * w + x)];
      if (v == 0) continue;
      for (std::ptrdiff_t d = -r; d <= r; ++d)
        if (x + d >= 0 && x + d < w) tmp.values[std::size_t(y * w + x + d)] += v * k[std::size_t(d + r)];
    }
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t d = -r; d <= r; ++d) {
      if (y + d < 0 || y + d >= h) continue;
      const double kv = k[std::size_t(d + r)];
      const double* src = tmp.values.data() + y * w;
      double* dst = out.values.data() + (y + d) * w;
      for (std::ptrdiff_t x = 0; x < w; ++x) dst[x] += kv * src[x];
    }
  return out;
}

/// Scales to sum 1. A map with zero mass is left untouched.
inline SaliencyMap normalized(SaliencyMap m) {
  double sum = 0;
  for (double v : m.values) sum += v;
  if (sum > 0)
    for (auto& v : m.values) v /= sum;
  return m;
}

/// Unit impulses at every fixation, blurred, normalized to a distribution.
inline SaliencyMap build_saliency(const std::vector<Scanpath>& scanpaths, std::size_t height, std::size_t width, double sigma) {
  SaliencyMap impulses(height, width);
  std::size_t count = 0;
  for (const auto& sp : scanpaths)
    for (const auto& f : sp.fixations) {
      const auto [r, c] = fixation_pixel(f.x, f.y, height, width);
      impulses.at(r, c) += 1.0;
      ++count;
    }
  if (count == 0) throw DataError("build_saliency: no fixations");
  return normalized(gaussian_blur(impulses, sigma));
}

/// Binary map of fixated pixels, used by the location-based saliency metrics.
inline std::vector<std::pair<std::size_t, std::size_t>> fixation_pixels(const std::vector<Scanpath>& scanpaths, std::size_t height,
                                                                        std::size_t width) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& sp : scanpaths)
    for (const auto& f : sp.fixations) out.push_back(fixation_pixel(f.x, f.y, height, width));
  return out;
}

inline void write_pfm(const std::filesystem::path& path, const SaliencyMap& m) {
  std::ostringstream header;
  header << "Pf\n" << m.width << ' ' << m.height << "\n-1.0\n";
  io::ByteWriter w;
  w.put_bytes(header.str());
  for (std::size_t r = m.height; r-- > 0;)
    for (std::size_t c = 0; c < m.width; ++c) w.put<float>(float(m.at(r, c)));
  io::write_file(path.string(), w.bytes());
}

inline SaliencyMap read_pfm(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path.string());
  std::string text(bytes.begin(), bytes.begin() + std::ptrdiff_t(std::min<std::size_t>(bytes.size(), 64)));
  std::istringstream is(text);
  std::string magic;
  std::size_t w = 0, h = 0;
  double scale = 0;
  if (!(is >> magic >> w >> h >> scale) || magic != "Pf") throw FormatError(path.string() + ": not a grayscale PFM");
  if (scale >= 0) throw FormatError(path.string() + ": big-endian PFM not supported");
  const auto offset = std::size_t(is.tellg()) + 1;
  if (bytes.size() != offset + w * h * sizeof(float)) throw FormatError(path.string() + ": PFM payload size mismatch");
  SaliencyMap m(h, w);
  io::ByteReader rd(std::span<const std::uint8_t>(bytes).subspan(offset));
  for (std::size_t r = h; r-- > 0;)
    for (std::size_t c = 0; c < w; ++c) m.at(r, c) = double(rd.get<float>());
  return m;
}

/// 8-bit preview scaled so the maximum maps to 255.
inline void write_pgm(const std::filesystem::path& path, const SaliencyMap& m) {
  double peak = 0;
  for (double v : m.values) peak = std::max(peak, v);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P5\n" << m.width << ' ' << m.height << "\n255\n";
  for (double v : m.values) os.put(char(std::uint8_t(peak > 0 ? std::lround(255.0 * std::max(0.0, v) / peak) : 0)));
}

}  // namespace gazediff
