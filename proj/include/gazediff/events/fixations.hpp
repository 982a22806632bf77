#pragma once

// Dispersion-threshold (I-DT) fixation detection and the scanpath text format:
//   stimulus_id, idx, x, y, onset_s, duration_s

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gazediff/core/errors.hpp"
#include "gazediff/core/geometry.hpp"

namespace gazediff {

struct Fixation {
  double x = 0;  // pixels, window centroid
  double y = 0;
  double onset = 0;     // seconds
  double duration = 0;  // seconds
};

struct Scanpath {
  std::string stimulus_id;
  std::vector<Fixation> fixations;

  PointSequence points() const {
    PointSequence out;
    out.reserve(fixations.size());
    for (const auto& f : fixations) out.push_back({f.x, f.y});
    return out;
  }
};

struct FixationParams {
  double dispersion_px = 25.0;
  double min_duration_s = 0.100;
};

namespace detail {

struct Extent {
  double min_x = std::numeric_limits<double>::infinity(), max_x = -std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity(), max_y = -std::numeric_limits<double>::infinity();

  void add(const Point& p) {
    min_x = std::min(min_x, p.x), max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y), max_y = std::max(max_y, p.y);
  }
  double dispersion() const { return (max_x - min_x) + (max_y - min_y); }
};

inline Extent extent(const PointSequence& pts, std::size_t begin, std::size_t end) {
  Extent e;
  for (std::size_t i = begin; i < end; ++i) e.add(pts[i]);
  return e;
}

}  // namespace detail

/// Samples needed to span `min_duration_s` at `rate_hz`.
inline std::size_t min_fixation_samples(const FixationParams& p, double rate_hz) {
  return std::max<std::size_t>(1, std::size_t(std::ceil(p.min_duration_s * rate_hz - 1e-9)));
}

/// Greedy I-DT over a pixel-space trajectory sampled at `rate_hz` starting at t = 0.
/// Each fixation is the maximal window from its first sample whose dispersion
/// (x range + y range) stays within the threshold.
inline std::vector<Fixation> extract_fixations(const PointSequence& traj, double rate_hz, const FixationParams& params = {}) {
  if (traj.empty()) throw DataError("extract_fixations: empty trajectory");
  if (!(rate_hz > 0)) throw std::invalid_argument("extract_fixations: rate_hz must be positive");
  for (const auto& p : traj)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw NumericError("extract_fixations: non-finite sample");
  const std::size_t n = traj.size(), window = min_fixation_samples(params, rate_hz);
  std::vector<Fixation> out;
  std::size_t start = 0;
  while (start + window <= n) {
    detail::Extent e = detail::extent(traj, start, start + window);
    if (e.dispersion() > params.dispersion_px) {
      ++start;
      continue;
    }
    std::size_t end = start + window;
    while (end < n) {
      detail::Extent grown = e;
      grown.add(traj[end]);
      if (grown.dispersion() > params.dispersion_px) break;
      e = grown;
      ++end;
    }
    double sx = 0, sy = 0;
    for (std::size_t i = start; i < end; ++i) sx += traj[i].x, sy += traj[i].y;
    const double count = double(end - start);
    out.push_back({sx / count, sy / count, double(start) / rate_hz, count / rate_hz});
    start = end;
  }
  return out;
}

inline void write_scanpath(const std::filesystem::path& path, const Scanpath& sp) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < sp.fixations.size(); ++i) {
    const auto& f = sp.fixations[i];
    os << sp.stimulus_id << ", " << i << ", " << f.x << ", " << f.y << ", " << f.onset << ", " << f.duration << '\n';
  }
}

/// An empty file is an empty scanpath whose stimulus id is unknown.
inline Scanpath read_scanpath(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  Scanpath sp;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string id, field;
    std::getline(ls, id, ',');
    std::vector<double> v;
    while (std::getline(ls, field, ',')) {
      try {
        v.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
      }
    }
    if (v.size() != 5) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    id.erase(0, id.find_first_not_of(" \t"));
    id.erase(id.find_last_not_of(" \t") + 1);
    if (sp.fixations.empty()) sp.stimulus_id = id;
    else if (id != sp.stimulus_id) throw DataError(path.string() + ": mixed stimulus ids '" + sp.stimulus_id + "' and '" + id + "'");
    if (v[0] != double(sp.fixations.size())) throw DataError(path.string() + ":" + std::to_string(lineno) + ": fixation index out of order");
    sp.fixations.push_back({v[1], v[2], v[3], v[4]});
  }
  return sp;
}

}  // namespace gazediff
