#pragma once

// Corresponding positional embedding: one sinusoidal grid over the stimulus
// frame, indexed at each gaze coordinate and, bilinearly shrunk, added to the
// feature tokens, so both modalities share a positional frame.

#include <algorithm>
#include <cmath>
#include <vector>

#include "gazediff/core/errors.hpp"
#include "gazediff/core/geometry.hpp"
#include "gazediff/features/feature_grid.hpp"

namespace gazediff {

/// Writes the 1D sinusoidal code of `pos` into out[0, dim): the first half are
/// sines, the second half cosines, frequencies 10000^(-k / (dim/2)).
template <class T>
void sinusoid(double pos, std::size_t dim, T* out) {
  const std::size_t half = dim / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * double(k) / double(half));
    out[k] = T(std::sin(pos * freq));
    out[half + k] = T(std::cos(pos * freq));
  }
}

/// H x W x D grid. Channels [0, D/2) encode the row, [D/2, D) the column.
template <class T>
struct CpeGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t dim = 0;
  std::vector<T> values;

  const T* at(std::size_t y, std::size_t x) const { return values.data() + (y * width + x) * dim; }

  /// True for channels holding a sine term.
  static bool is_sine_channel(std::size_t c, std::size_t dim) { return (c % (dim / 2)) < dim / 4; }
};

template <class T>
CpeGrid<T> make_cpe_grid(std::size_t height, std::size_t width, std::size_t dim) {
  if (dim == 0 || dim % 4 != 0) throw DimensionError("cpe: embedding dim must be a positive multiple of 4");
  CpeGrid<T> g{height, width, dim, std::vector<T>(height * width * dim)};
  std::vector<T> row(dim / 2), col(dim / 2);
  for (std::size_t y = 0; y < height; ++y) {
    sinusoid(double(y), dim / 2, row.data());
    for (std::size_t x = 0; x < width; ++x) {
      sinusoid(double(x), dim / 2, col.data());
      T* cell = g.values.data() + (y * width + x) * dim;
      std::copy(row.begin(), row.end(), cell);
      std::copy(col.begin(), col.end(), cell + dim / 2);
    }
  }
  return g;
}

/// Nearest grid pixel of a model-space coordinate, clamped into the frame.
inline std::pair<std::size_t, std::size_t> cpe_pixel(const Point& p, std::size_t height, std::size_t width) {
  auto index = [](double u, std::size_t n) {
    const double px = std::round((u + 1.0) * 0.5 * double(n - 1));
    if (!(px > 0)) return std::size_t{0};  // also catches NaN
    return std::min(std::size_t(px), n - 1);
  };
  return {index(p.y, height), index(p.x, width)};
}

/// Writes p_i = P[y_i, x_i, :] for each coordinate into out[L * D].
template <class T>
void cpe_lookup(const Point* coords, std::size_t len, const CpeGrid<T>& grid, T* out) {
  for (std::size_t i = 0; i < len; ++i) {
    const auto [y, x] = cpe_pixel(coords[i], grid.height, grid.width);
    std::copy_n(grid.at(y, x), grid.dim, out + i * grid.dim);
  }
}

template <class T>
std::vector<T> cpe_lookup(const PointSequence& coords, const CpeGrid<T>& grid) {
  std::vector<T> out(coords.size() * grid.dim);
  cpe_lookup(coords.data(), coords.size(), grid, out.data());
  return out;
}

/// P' : the grid bilinearly resampled to the feature resolution.
template <class T>
std::vector<T> cpe_for_features(const CpeGrid<T>& grid, std::size_t grid_h, std::size_t grid_w) {
  return resample_bilinear(grid.values, grid.height, grid.width, grid.dim, grid_h, grid_w);
}

/// R_CPE = R_proj + p (elementwise). Shapes must match.
template <class T>
std::vector<T> apply_cpe(const std::vector<T>& projected, const std::vector<T>& positional) {
  if (projected.size() != positional.size())
    throw DimensionError("apply_cpe: " + std::to_string(projected.size()) + " vs " + std::to_string(positional.size()) +
                         " values");
  std::vector<T> out(projected);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += positional[i];
  return out;
}

/// F_CPE = F_proj + P' over H' x W' x D values.
template <class T>
std::vector<T> apply_cpe_features(const std::vector<T>& projected, const std::vector<T>& interpolated_grid) {
  return apply_cpe(projected, interpolated_grid);
}

}  // namespace gazediff
