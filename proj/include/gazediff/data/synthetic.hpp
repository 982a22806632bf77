#pragma once

// Synthetic two-blob corpus: each stimulus carries a salient blob (signature 0)
// and a distractor blob (signature 1) on opposite halves of the frame; every
// recording dwells on the salient blob. Used to verify that conditioning works
// without a foundation-model feature exporter.

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gazediff/data/gaze_data.hpp"
#include "gazediff/features/feature_grid.hpp"

namespace gazediff {

struct SyntheticOptions {
  std::size_t stimuli = 40;
  std::size_t recordings_per_stimulus = 15;
  std::size_t samples_per_recording = 64;
  std::size_t grid_h = 8;
  std::size_t grid_w = 8;
  std::size_t feature_dim = 8;
  FrameSize frame{224, 224};
  double blob_sigma = 0.08;       // relative to the frame
  double center_jitter = 0.05;    // relative jitter of blob centers
  double fixation_spread = 0.35;  // std of fixation points, in blob sigmas
  double duration_s = 3.0;        // each recording spans this long, whatever its sample count
  double background_noise = 0.02;
  std::uint64_t seed = 7;

  double rate_hz() const { return double(samples_per_recording) / duration_s; }
};

struct SyntheticStimulus {
  std::string id;
  FeatureGrid grid;
  FeatureGrid swapped_grid;  // same blobs and noise, salient and distractor signatures exchanged
  Point salient_px;     // center of the blob gaze dwells on
  Point distractor_px;
  double sigma_px = 0;  // blob sigma in pixels
  std::vector<RawRecording> recordings;
};

inline std::string synthetic_stimulus_id(std::size_t i) {
  std::string s = std::to_string(i);
  return "syn" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

/// Gaze dwelling on `center`: a few fixations scattered around it joined by short
/// saccades, with small per-sample jitter. Timestamps at rate_hz().
inline RawRecording synth_recording(const Point& center, double sigma_px, const SyntheticOptions& o, std::mt19937_64& rng,
                                    std::string subject, std::string stimulus) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> n_fix(2, 4);
  const std::size_t n = o.samples_per_recording, fixations = n_fix(rng);
  std::vector<Point> targets;
  for (std::size_t f = 0; f < fixations; ++f)
    targets.push_back({center.x + o.fixation_spread * sigma_px * normal(rng), center.y + o.fixation_spread * sigma_px * normal(rng)});
  RawRecording rec{std::move(subject), std::move(stimulus), {}, o.rate_hz()};
  const std::size_t saccade = std::max<std::size_t>(1, n / 32);
  const double dwell = double(n) / double(fixations);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t f = std::min(fixations - 1, std::size_t(double(i) / dwell));
    const double into = double(i) - double(f) * dwell;
    Point p = targets[f];
    if (f > 0 && into < double(saccade)) {
      const double a = (into + 1.0) / double(saccade + 1);
      p = {targets[f - 1].x + a * (targets[f].x - targets[f - 1].x), targets[f - 1].y + a * (targets[f].y - targets[f - 1].y)};
    }
    p.x += 0.05 * sigma_px * normal(rng);
    p.y += 0.05 * sigma_px * normal(rng);
    p.x = std::clamp(p.x, 0.0, double(o.frame.width - 1));
    p.y = std::clamp(p.y, 0.0, double(o.frame.height - 1));
    rec.samples.push_back({double(i) / o.rate_hz(), p.x, p.y, true});
  }
  return rec;
}

inline std::vector<SyntheticStimulus> make_two_blob_dataset(const SyntheticOptions& o) {
  if (o.feature_dim < 2) throw std::invalid_argument("synthetic dataset needs feature_dim >= 2");
  if (o.samples_per_recording < 2 || !(o.duration_s > 0)) throw std::invalid_argument("synthetic recordings need >= 2 samples and a positive duration");
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> jitter(-o.center_jitter, o.center_jitter);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<SyntheticStimulus> out;
  const double w = double(o.frame.width - 1), h = double(o.frame.height - 1);
  for (std::size_t i = 0; i < o.stimuli; ++i) {
    SyntheticStimulus s;
    s.id = synthetic_stimulus_id(i);
    const bool salient_left = i % 2 == 0;
    const Blob left{0.25 + jitter(rng), 0.5 + jitter(rng), o.blob_sigma, salient_left ? 0u : 1u};
    const Blob right{0.75 + jitter(rng), 0.5 + jitter(rng), o.blob_sigma, salient_left ? 1u : 0u};
    s.grid = synth_grid({left, right}, o.grid_h, o.grid_w, o.feature_dim, s.id);
    Blob left_swapped = left, right_swapped = right;
    std::swap(left_swapped.signature, right_swapped.signature);
    s.swapped_grid = synth_grid({left_swapped, right_swapped}, o.grid_h, o.grid_w, o.feature_dim, s.id);
    for (std::size_t k = 0; k < s.grid.values.size(); ++k) {
      const float noise = float(o.background_noise * normal(rng));
      s.grid.values[k] += noise;
      s.swapped_grid.values[k] += noise;
    }
    const Blob& sal = salient_left ? left : right;
    const Blob& dis = salient_left ? right : left;
    s.salient_px = {sal.cx * w, sal.cy * h};
    s.distractor_px = {dis.cx * w, dis.cy * h};
    s.sigma_px = o.blob_sigma * w;
    for (std::size_t r = 0; r < o.recordings_per_stimulus; ++r)
      s.recordings.push_back(synth_recording(s.salient_px, s.sigma_px, o, rng, "sub" + std::to_string(r), s.id));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gazediff
