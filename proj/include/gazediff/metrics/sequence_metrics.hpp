#pragma once

// Trajectory and scanpath distances (edit distance on grid cells, DTW, discrete
// Frechet, time-delay embedding) and the per-image best/mean aggregation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gazediff/core/errors.hpp"
#include "gazediff/core/geometry.hpp"

namespace gazediff::metrics {

/// Plain edit distance with unit insertion, deletion and substitution costs.
inline std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct CellGrid {
  std::size_t rows = 12;
  std::size_t cols = 16;
  FrameSize frame;
};

/// Cell symbol row * cols + col of a pixel-space point.
inline int cell_symbol(const Point& p, const CellGrid& g) {
  if (g.rows == 0 || g.cols == 0) throw std::invalid_argument("levenshtein grid must have at least one row and column");
  const auto bin = [](double v, std::size_t extent, std::size_t n) {
    const double f = std::floor(v / double(extent) * double(n));
    return std::size_t(std::clamp(f, 0.0, double(n - 1)));
  };
  return int(bin(p.y, g.frame.height, g.rows) * g.cols + bin(p.x, g.frame.width, g.cols));
}

inline std::vector<int> cell_string(const PointSequence& pts, const CellGrid& g) {
  std::vector<int> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(cell_symbol(p, g));
  return out;
}

inline std::size_t levenshtein(const PointSequence& a, const PointSequence& b, const CellGrid& g = {}) {
  return edit_distance(cell_string(a, g), cell_string(b, g));
}

/// Sum of Euclidean costs along the optimal monotone alignment, no window.
inline double dtw(const PointSequence& a, const PointSequence& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("dtw: sequences must be nonempty");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(b.size() + 1, inf), cur(b.size() + 1, inf);
  prev[0] = 0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = distance(a[i - 1], b[j - 1]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Discrete Frechet distance: min over couplings of the max pointwise distance.
inline double frechet(const PointSequence& a, const PointSequence& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("frechet: sequences must be nonempty");
  std::vector<double> prev(b.size()), cur(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = distance(a[i], b[j]);
      if (i == 0 && j == 0) cur[j] = d;
      else if (i == 0) cur[j] = std::max(cur[j - 1], d);
      else if (j == 0) cur[j] = std::max(prev[j], d);
      else cur[j] = std::max(std::min({prev[j], cur[j - 1], prev[j - 1]}), d);
    }
    std::swap(prev, cur);
  }
  return prev[b.size() - 1];
}

/// Directed time-delay embedding distance from `a` into `b`: every length-k
/// window of `a` (step `stride`) is matched to its closest length-k window of
/// `b` by mean pointwise distance, and the matches are averaged.
inline double tde(const PointSequence& a, const PointSequence& b, std::size_t k = 5, std::size_t stride = 1) {
  if (k == 0 || stride == 0) throw std::invalid_argument("tde: k and stride must be positive");
  if (a.size() < k || b.size() < k)
    throw DimensionError("tde: sequences of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                         " shorter than k = " + std::to_string(k));
  double total = 0;
  std::size_t windows = 0;
  for (std::size_t i = 0; i + k <= a.size(); i += stride) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + k <= b.size(); ++j) {
      double s = 0;
      for (std::size_t q = 0; q < k; ++q) s += distance(a[i + q], b[j + q]);
      best = std::min(best, s / double(k));
    }
    total += best;
    ++windows;
  }
  return total / double(windows);
}

struct BestMean {
  double best = 0;
  double mean = 0;
};

/// One image: distances[g][s] between ground truth g and generated s. Per ground
/// truth take the min and the average over generated, then average both over
/// ground truths.
inline BestMean aggregate(const std::vector<std::vector<double>>& distances) {
  if (distances.empty()) throw std::invalid_argument("aggregate: no ground-truth sequences");
  BestMean out;
  for (const auto& row : distances) {
    if (row.empty()) throw std::invalid_argument("aggregate: no generated sequences");
    double sum = 0, best = std::numeric_limits<double>::infinity();
    for (double d : row) sum += d, best = std::min(best, d);
    out.best += best;
    out.mean += sum / double(row.size());
  }
  out.best /= double(distances.size());
  out.mean /= double(distances.size());
  return out;
}

template <class Metric>
BestMean aggregate(const std::vector<PointSequence>& gt, const std::vector<PointSequence>& gen, Metric&& metric) {
  if (gen.empty()) throw std::invalid_argument("aggregate: no generated sequences");
  std::vector<std::vector<double>> d(gt.size(), std::vector<double>(gen.size()));
  for (std::size_t g = 0; g < gt.size(); ++g)
    for (std::size_t s = 0; s < gen.size(); ++s) d[g][s] = double(metric(gt[g], gen[s]));
  return aggregate(d);
}

/// Dataset level: the plain average of per-image values.
inline BestMean average(const std::vector<BestMean>& images) {
  if (images.empty()) throw std::invalid_argument("average: no images");
  BestMean out;
  for (const auto& v : images) out.best += v.best, out.mean += v.mean;
  out.best /= double(images.size());
  out.mean /= double(images.size());
  return out;
}

}  // namespace gazediff::metrics
