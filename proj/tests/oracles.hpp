#pragma once

// Brute-force reference implementations used as independent test oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "gazediff/core/geometry.hpp"
#include "gazediff/events/saliency.hpp"

namespace oracle {

using gazediff::PointSequence;

/// Edit distance by the textbook three-way recursion, no memoization.
inline std::size_t edit_distance_recursive(const std::vector<int>& a, const std::vector<int>& b, std::size_t i, std::size_t j) {
  if (i == 0) return j;
  if (j == 0) return i;
  return std::min({edit_distance_recursive(a, b, i - 1, j) + 1, edit_distance_recursive(a, b, i, j - 1) + 1,
                   edit_distance_recursive(a, b, i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
}

/// Minimum cost over every monotone alignment path from (0,0) to (n-1,m-1).
inline double dtw_enumerate(const PointSequence& a, const PointSequence& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double cost) {
    cost += gazediff::distance(a[i], b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, cost);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, cost);
    if (j + 1 < b.size()) walk(i, j + 1, cost);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, cost);
  };
  walk(0, 0, 0.0);
  return best;
}

/// Discrete Frechet coupling distance by its recursive definition.
inline double frechet_recursive(const PointSequence& a, const PointSequence& b, std::size_t i, std::size_t j) {
  const double d = gazediff::distance(a[i], b[j]);
  if (i == 0 && j == 0) return d;
  if (i == 0) return std::max(frechet_recursive(a, b, 0, j - 1), d);
  if (j == 0) return std::max(frechet_recursive(a, b, i - 1, 0), d);
  return std::max(std::min({frechet_recursive(a, b, i - 1, j), frechet_recursive(a, b, i - 1, j - 1), frechet_recursive(a, b, i, j - 1)}), d);
}

inline double tde_loops(const PointSequence& a, const PointSequence& b, std::size_t k, std::size_t stride) {
  std::vector<double> minima;
  for (std::size_t i = 0; i + k <= a.size(); i += stride) {
    std::vector<double> candidates;
    for (std::size_t j = 0; j + k <= b.size(); ++j) {
      double s = 0;
      for (std::size_t q = 0; q < k; ++q) s += std::hypot(a[i + q].x - b[j + q].x, a[i + q].y - b[j + q].y);
      candidates.push_back(s / double(k));
    }
    minima.push_back(*std::min_element(candidates.begin(), candidates.end()));
  }
  double s = 0;
  for (double m : minima) s += m;
  return s / double(minima.size());
}

/// ROC area by counting, at each fixated-pixel threshold, how many fixated and
/// non-fixated pixels reach it.
inline double auc_judd_sweep(const gazediff::SaliencyMap& pred, const std::vector<std::pair<std::size_t, std::size_t>>& fixations) {
  std::set<std::pair<std::size_t, std::size_t>> fix(fixations.begin(), fixations.end());
  std::vector<double> thresholds;
  for (const auto& [r, c] : fix) thresholds.push_back(pred.at(r, c));
  std::sort(thresholds.rbegin(), thresholds.rend());
  const double n_fix = double(fix.size()), n_neg = double(pred.size() - fix.size());
  std::vector<double> tp{0}, fp{0};
  for (double t : thresholds) {
    double hit = 0, false_alarm = 0;
    for (std::size_t r = 0; r < pred.height; ++r)
      for (std::size_t c = 0; c < pred.width; ++c) {
        if (pred.at(r, c) < t) continue;
        if (fix.count({r, c})) hit += 1;
        else false_alarm += 1;
      }
    tp.push_back(hit / n_fix);
    fp.push_back(false_alarm / n_neg);
  }
  tp.push_back(1);
  fp.push_back(1);
  double area = 0;
  for (std::size_t i = 1; i < tp.size(); ++i) area += (fp[i] - fp[i - 1]) * (tp[i] + tp[i - 1]) / 2;
  return area;
}

}  // namespace oracle
