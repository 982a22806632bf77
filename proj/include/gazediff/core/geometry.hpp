#pragma once

#include <cmath>
#include <vector>

namespace gazediff {

struct Point {
  double x = 0;
  double y = 0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

using PointSequence = std::vector<Point>;

/// Frame size in pixels, height first.
struct FrameSize {
  std::size_t height = 224;
  std::size_t width = 224;
};

}  // namespace gazediff
