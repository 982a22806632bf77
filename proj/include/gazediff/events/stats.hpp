#pragma once

// Scanpath statistics: saccade amplitude, saccade direction and the signed
// angle between consecutive saccades, with fixed-bin histograms.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "gazediff/events/fixations.hpp"

namespace gazediff {

struct ScanpathStats {
  std::vector<double> amplitudes;        // pixels
  std::vector<double> directions;        // degrees in (-180, 180]
  std::vector<double> saccade_angles;    // degrees in (-180, 180]
};

/// atan2 in degrees folded onto (-180, 180].
inline double angle_degrees(double y, double x) {
  const double a = std::atan2(y, x) * 180.0 / std::numbers::pi;
  return a <= -180.0 ? a + 360.0 : a;
}

/// Zero-length saccades have an amplitude but no direction.
inline ScanpathStats scanpath_stats(const std::vector<Scanpath>& scanpaths) {
  ScanpathStats out;
  for (const auto& sp : scanpaths) {
    const auto& f = sp.fixations;
    bool have_prev = false;
    double px = 0, py = 0;
    for (std::size_t i = 1; i < f.size(); ++i) {
      const double dx = f[i].x - f[i - 1].x, dy = f[i].y - f[i - 1].y;
      out.amplitudes.push_back(std::hypot(dx, dy));
      if (dx == 0 && dy == 0) {
        have_prev = false;
        continue;
      }
      out.directions.push_back(angle_degrees(dy, dx));
      if (have_prev) out.saccade_angles.push_back(angle_degrees(px * dy - py * dx, px * dx + py * dy));
      px = dx, py = dy, have_prev = true;
    }
  }
  return out;
}

struct Histogram {
  std::vector<double> centers;
  std::vector<std::size_t> counts;

  double mean_count() const {
    double s = 0;
    for (auto c : counts) s += double(c);
    return counts.empty() ? 0.0 : s / double(counts.size());
  }
  std::size_t count_at(double center) const {
    for (std::size_t i = 0; i < centers.size(); ++i)
      if (std::abs(centers[i] - center) < 1e-9) return counts[i];
    return 0;
  }
};

/// `bins` equal-width bins centred on multiples of 360/bins, so 0 and 180 each
/// sit in the middle of their own bin. Centers ascend from -180 + width to 180.
inline Histogram angle_histogram(const std::vector<double>& angles, std::size_t bins = 36) {
  const double width = 360.0 / double(bins);
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i < bins; ++i) {
    const double c = double(i) * width;
    h.centers.push_back(c > 180.0 + 1e-9 ? c - 360.0 : c);
  }
  for (double a : angles) {
    auto idx = std::llround(a / width) % static_cast<long long>(bins);
    if (idx < 0) idx += static_cast<long long>(bins);
    ++h.counts[std::size_t(idx)];
  }
  std::vector<std::size_t> order(bins);
  for (std::size_t i = 0; i < bins; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return h.centers[a] < h.centers[b]; });
  Histogram sorted;
  for (auto i : order) sorted.centers.push_back(h.centers[i]), sorted.counts.push_back(h.counts[i]);
  return sorted;
}

/// `bins` equal bins over [0, max_value]; values beyond the range land in the last bin.
inline Histogram amplitude_histogram(const std::vector<double>& values, double max_value, std::size_t bins = 30) {
  if (!(max_value > 0) || bins == 0) throw std::invalid_argument("amplitude_histogram: need max_value > 0 and bins > 0");
  const double width = max_value / double(bins);
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i < bins; ++i) h.centers.push_back((double(i) + 0.5) * width);
  for (double v : values) ++h.counts[std::min(bins - 1, std::size_t(std::max(0.0, v) / width))];
  return h;
}

/// CSV rows "panel,bin_center,count".
inline void write_histogram_csv(std::ostream& os, const std::string& panel, const Histogram& h) {
  for (std::size_t i = 0; i < h.counts.size(); ++i) os << panel << ',' << h.centers[i] << ',' << h.counts[i] << '\n';
}

}  // namespace gazediff
