#pragma once

// Saliency-map metrics: AUC-Judd, AUC-Borji, NSS, SIM, CC, KL.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gazediff/core/errors.hpp"
#include "gazediff/events/saliency.hpp"

namespace gazediff::metrics {

using PixelList = std::vector<std::pair<std::size_t, std::size_t>>;  // (row, col)

struct SaliencyScores {
  double auc_judd = 0;
  double auc_borji = 0;
  double nss = 0;
  double sim = 0;
  double cc = 0;
  double kl = 0;
  bool degenerate_prediction = false;  // zero variance: NSS and CC reported as 0
};

struct SaliencyMetricOptions {
  double kl_epsilon = 1e-7;
  std::size_t borji_splits = 100;
  double borji_step = 0.1;
  std::uint64_t borji_seed = 0;
};

namespace detail {

inline void require_same_dims(const SaliencyMap& a, const SaliencyMap& b) {
  if (a.height != b.height || a.width != b.width)
    throw DimensionError("saliency maps differ in size: " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                         std::to_string(b.height) + "x" + std::to_string(b.width));
}

inline PixelList unique_in_bounds(const PixelList& fix, const SaliencyMap& m) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& p : fix) {
    if (p.first >= m.height || p.second >= m.width) throw DataError("fixation pixel outside the saliency map");
    seen.insert(p);
  }
  return {seen.begin(), seen.end()};
}

/// Population mean and standard deviation. A spread below rounding noise of the
/// values reports as exactly 0.
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0, peak = 0;
  for (double x : v) mean += x, peak = std::max(peak, std::abs(x));
  mean /= double(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / double(v.size()));
  return {mean, sd <= 1e-12 * peak ? 0.0 : sd};
}

/// Min-max scaled copy in [0, 1]; constant maps become all zeros.
inline std::vector<double> unit_range(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  if (*hi > *lo)
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
  return out;
}

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double area = 0;
  for (std::size_t i = 1; i < x.size(); ++i) area += (x[i] - x[i - 1]) * (y[i] + y[i - 1]) * 0.5;
  return area;
}

}  // namespace detail

/// Mean of the z-scored prediction at fixated pixels.
inline double nss(const SaliencyMap& pred, const PixelList& fixations, bool* degenerate = nullptr) {
  const auto fix = detail::unique_in_bounds(fixations, pred);
  if (fix.empty()) throw DataError("nss: no fixations");
  const auto [mean, sd] = detail::mean_std(pred.values);
  if (degenerate) *degenerate = sd == 0;
  if (sd == 0) return 0.0;
  double s = 0;
  for (const auto& [r, c] : fix) s += (pred.at(r, c) - mean) / sd;
  return s / double(fix.size());
}

/// Histogram intersection of the two maps as distributions.
inline double sim(const SaliencyMap& pred, const SaliencyMap& gt) {
  detail::require_same_dims(pred, gt);
  const auto p = normalized(pred), q = normalized(gt);
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::min(p.values[i], q.values[i]);
  return s;
}

/// Pearson correlation over cells.
inline double cc(const SaliencyMap& pred, const SaliencyMap& gt, bool* degenerate = nullptr) {
  detail::require_same_dims(pred, gt);
  const auto [mp, sp] = detail::mean_std(pred.values);
  const auto [mq, sq] = detail::mean_std(gt.values);
  if (degenerate) *degenerate = sp == 0 || sq == 0;
  if (sp == 0 || sq == 0) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred.values[i] - mp) * (gt.values[i] - mq);
  return s / (double(pred.size()) * sp * sq);
}

/// KL(gt || pred) over the maps as distributions, with epsilon on both sides of
/// the ratio so identical maps score exactly 0.
inline double kl(const SaliencyMap& pred, const SaliencyMap& gt, double eps = 1e-7) {
  detail::require_same_dims(pred, gt);
  const auto p = normalized(pred), q = normalized(gt);
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (q.values[i] > 0) s += q.values[i] * std::log((q.values[i] + eps) / (p.values[i] + eps));
  return s;
}

/// ROC area with the prediction values at fixated pixels as thresholds.
inline double auc_judd(const SaliencyMap& pred, const PixelList& fixations) {
  const auto fix = detail::unique_in_bounds(fixations, pred);
  if (fix.empty()) throw DataError("auc_judd: no fixations");
  const std::size_t n_pix = pred.size(), n_fix = fix.size();
  if (n_fix >= n_pix) throw DataError("auc_judd: every pixel is fixated");
  std::vector<double> thresholds;
  for (const auto& [r, c] : fix) thresholds.push_back(pred.at(r, c));
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  std::vector<double> sorted = pred.values;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<double> tp{0.0}, fp{0.0};
  std::size_t above = 0;
  for (std::size_t i = 0; i < n_fix; ++i) {
    const double t = thresholds[i];
    while (above < n_pix && sorted[above] >= t) ++above;
    std::size_t fix_above = i + 1;
    while (fix_above < n_fix && thresholds[fix_above] >= t) ++fix_above;
    tp.push_back(double(fix_above) / double(n_fix));
    fp.push_back(double(above - fix_above) / double(n_pix - n_fix));
  }
  tp.push_back(1.0);
  fp.push_back(1.0);
  return detail::trapezoid(fp, tp);
}

/// ROC area against uniformly drawn negative pixels, averaged over seeded splits.
inline double auc_borji(const SaliencyMap& pred, const PixelList& fixations, const SaliencyMetricOptions& opt = {}) {
  const auto fix = detail::unique_in_bounds(fixations, pred);
  if (fix.empty()) throw DataError("auc_borji: no fixations");
  const auto s = detail::unit_range(pred.values);
  std::vector<double> at_fix;
  for (const auto& [r, c] : fix) at_fix.push_back(s[r * pred.width + c]);
  std::mt19937_64 rng(opt.borji_seed);
  std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
  double total = 0;
  for (std::size_t split = 0; split < opt.borji_splits; ++split) {
    std::vector<double> neg(fix.size());
    for (auto& v : neg) v = s[pick(rng)];
    const double top = std::max(*std::max_element(at_fix.begin(), at_fix.end()), *std::max_element(neg.begin(), neg.end()));
    std::vector<double> tp{0.0}, fp{0.0};
    const auto steps = std::size_t(std::floor(top / opt.borji_step + 1e-12));
    for (std::size_t k = steps + 1; k-- > 0;) {
      const double t = double(k) * opt.borji_step;
      const auto frac = [t](const std::vector<double>& v) {
        return double(std::count_if(v.begin(), v.end(), [t](double x) { return x >= t; })) / double(v.size());
      };
      tp.push_back(frac(at_fix));
      fp.push_back(frac(neg));
    }
    tp.push_back(1.0);
    fp.push_back(1.0);
    total += detail::trapezoid(fp, tp);
  }
  return total / double(opt.borji_splits);
}

inline SaliencyScores saliency_metrics(const SaliencyMap& pred, const SaliencyMap& gt, const PixelList& gt_fixations,
                                       const SaliencyMetricOptions& opt = {}) {
  detail::require_same_dims(pred, gt);
  SaliencyScores s;
  bool flat_nss = false, flat_cc = false;
  s.auc_judd = auc_judd(pred, gt_fixations);
  s.auc_borji = auc_borji(pred, gt_fixations, opt);
  s.nss = nss(pred, gt_fixations, &flat_nss);
  s.sim = sim(pred, gt);
  s.cc = cc(pred, gt, &flat_cc);
  s.kl = kl(pred, gt, opt.kl_epsilon);
  s.degenerate_prediction = flat_nss || flat_cc;
  return s;
}

}  // namespace gazediff::metrics
