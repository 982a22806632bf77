#pragma once

// Raw eye-tracking recordings, preprocessing to fixed-length trajectories in
// normalized model space [-1, 1]^2, stimulus-level splits and the GZTR store:
//   "GZTR" u32 version=1 u32 count
//   count x { u16 stimulus_id, u16 subject_id, u32 L, L*2 f32 (x, y) }

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gazediff/core/binary_io.hpp"
#include "gazediff/core/errors.hpp"
#include "gazediff/core/geometry.hpp"

namespace gazediff {

struct GazeSample {
  double t = 0;  // seconds
  double x = 0;  // pixels
  double y = 0;
  bool valid = true;
};

struct RawRecording {
  std::string subject_id;
  std::string stimulus_id;
  std::vector<GazeSample> samples;
  double rate_hz = 240.0;
};

struct Trajectory {
  std::string stimulus_id;
  std::string subject_id;
  PointSequence coords;  // normalized model space
};

class EmptyRecordingError : public DataError {
 public:
  using DataError::DataError;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN" || s == "NAN" || s.empty()) return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

}  // namespace detail

/// Parses the recording text format: header "t,x,y,valid" then one sample per line.
/// Empty or "nan" coordinates are kept as NaN and dropped by preprocess().
inline RawRecording parse_recording(std::istream& in, std::string subject_id, std::string stimulus_id) {
  RawRecording rec{std::move(subject_id), std::move(stimulus_id), {}, 0.0};
  std::string line;
  if (!std::getline(in, line)) throw FormatError("recording: missing header");
  if (detail::split_csv_line(line) != std::vector<std::string>{"t", "x", "y", "valid"})
    throw FormatError("recording: expected header t,x,y,valid");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 4) throw FormatError("recording: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    GazeSample s;
    try {
      s.t = detail::parse_double(f[0]);
      s.x = detail::parse_double(f[1]);
      s.y = detail::parse_double(f[2]);
      s.valid = detail::parse_double(f[3]) != 0.0;
    } catch (const std::logic_error&) {
      throw FormatError("recording: bad number on line " + std::to_string(lineno));
    }
    if (!rec.samples.empty() && !(s.t > rec.samples.back().t))
      throw DataError("recording: timestamps not strictly increasing at line " + std::to_string(lineno));
    rec.samples.push_back(s);
  }
  if (rec.samples.size() >= 2) {
    std::vector<double> dt;
    for (std::size_t i = 1; i < rec.samples.size(); ++i) dt.push_back(rec.samples[i].t - rec.samples[i - 1].t);
    std::nth_element(dt.begin(), dt.begin() + dt.size() / 2, dt.end());
    rec.rate_hz = 1.0 / dt[dt.size() / 2];
  } else {
    rec.rate_hz = 240.0;
  }
  return rec;
}

inline RawRecording load_recording(const std::string& path, std::string subject_id, std::string stimulus_id) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open recording " + path);
  return parse_recording(in, std::move(subject_id), std::move(stimulus_id));
}

inline void write_recording(std::ostream& out, const RawRecording& rec) {
  out << "t,x,y,valid\n";
  out.precision(9);
  for (const auto& s : rec.samples) out << s.t << ',' << s.x << ',' << s.y << ',' << (s.valid ? 1 : 0) << '\n';
}

struct PreprocessOptions {
  std::size_t target_length = 720;
  double out_of_bounds_margin = 0.05;  // fraction of the frame tolerated outside the stimulus
  double truncate_ratio = 1.05;        // below this multiple of target_length, truncate instead of resampling
  bool keep_head = true;               // truncation keeps the first samples
};

struct PreprocessResult {
  std::optional<Trajectory> trajectory;
  std::string rejection;  // set when trajectory is empty
};

/// Maps a pixel of a (H, W) stimulus onto [-1, 1]^2. Inverse of denormalize().
inline Point normalize(const Point& px, FrameSize frame) {
  return {2.0 * px.x / double(frame.width - 1) - 1.0, 2.0 * px.y / double(frame.height - 1) - 1.0};
}

/// [-1, 1]^2 onto [0, W-1] x [0, H-1].
inline Point denormalize(const Point& p, FrameSize frame) {
  return {(p.x + 1.0) * 0.5 * double(frame.width - 1), (p.y + 1.0) * 0.5 * double(frame.height - 1)};
}

inline PointSequence normalize(const PointSequence& pixels, FrameSize frame) {
  PointSequence out;
  out.reserve(pixels.size());
  for (const auto& p : pixels) out.push_back(normalize(p, frame));
  return out;
}

inline PointSequence denormalize(const PointSequence& coords, FrameSize frame) {
  PointSequence out;
  out.reserve(coords.size());
  for (const auto& p : coords) out.push_back(denormalize(p, frame));
  return out;
}

/// Drops blinks and invalid samples, rejects short recordings, brings the rest to
/// exactly `target_length` samples and maps them to normalized model space.
inline PreprocessResult preprocess(const RawRecording& rec, FrameSize stimulus, const PreprocessOptions& opts = {}) {
  if (rec.samples.empty()) throw EmptyRecordingError("recording " + rec.subject_id + "/" + rec.stimulus_id + " is empty");
  const double mx = opts.out_of_bounds_margin * double(stimulus.width);
  const double my = opts.out_of_bounds_margin * double(stimulus.height);
  std::vector<GazeSample> kept;
  for (const auto& s : rec.samples) {
    if (!s.valid || !std::isfinite(s.x) || !std::isfinite(s.y)) continue;
    if (s.x < -mx || s.x > double(stimulus.width - 1) + mx || s.y < -my || s.y > double(stimulus.height - 1) + my) continue;
    kept.push_back(s);
  }
  if (kept.empty()) throw EmptyRecordingError("recording " + rec.subject_id + "/" + rec.stimulus_id + " has no valid samples");
  const std::size_t n = kept.size(), target = opts.target_length;
  if (n < target)
    return {std::nullopt, "only " + std::to_string(n) + " valid samples, need " + std::to_string(target)};

  std::vector<Point> px;
  px.reserve(target);
  if (n % target == 0) {
    const std::size_t step = n / target;
    for (std::size_t i = 0; i < target; ++i) px.push_back({kept[i * step].x, kept[i * step].y});
  } else if (double(n) < opts.truncate_ratio * double(target)) {
    const std::size_t first = opts.keep_head ? 0 : n - target;
    for (std::size_t i = 0; i < target; ++i) px.push_back({kept[first + i].x, kept[first + i].y});
  } else {
    const double t0 = kept.front().t, t1 = kept.back().t;
    std::size_t j = 0;
    for (std::size_t i = 0; i < target; ++i) {
      const double t = t0 + (t1 - t0) * double(i) / double(target - 1);
      while (j + 2 < n && kept[j + 1].t < t) ++j;
      const double span = kept[j + 1].t - kept[j].t;
      const double f = std::clamp((t - kept[j].t) / span, 0.0, 1.0);
      px.push_back({kept[j].x + f * (kept[j + 1].x - kept[j].x), kept[j].y + f * (kept[j + 1].y - kept[j].y)});
    }
  }

  Trajectory traj{rec.stimulus_id, rec.subject_id, {}};
  traj.coords.reserve(target);
  for (const auto& p : px) {
    Point q = normalize(p, stimulus);
    traj.coords.push_back({std::clamp(q.x, -1.0, 1.0), std::clamp(q.y, -1.0, 1.0)});
  }
  return {std::move(traj), {}};
}

struct DatasetSplit {
  std::set<std::string> train_stimuli;
  std::set<std::string> test_stimuli;
  std::uint64_t seed = 0;
};

/// Partitions stimuli (never recordings). Deterministic for a fixed seed and stimulus set.
inline DatasetSplit split(std::vector<std::string> stimuli, std::uint64_t seed, double test_fraction = 0.1) {
  if (!(test_fraction > 0 && test_fraction < 1)) throw std::invalid_argument("split: test_fraction must be in (0, 1)");
  std::sort(stimuli.begin(), stimuli.end());
  stimuli.erase(std::unique(stimuli.begin(), stimuli.end()), stimuli.end());
  if (stimuli.size() < 2) throw std::invalid_argument("split: need at least 2 stimuli");
  std::mt19937_64 rng(seed);
  std::shuffle(stimuli.begin(), stimuli.end(), rng);
  const auto n_test = std::clamp<std::size_t>(std::size_t(std::llround(test_fraction * double(stimuli.size()))), 1,
                                              stimuli.size() - 1);
  DatasetSplit out;
  out.seed = seed;
  out.test_stimuli.insert(stimuli.begin(), stimuli.begin() + std::ptrdiff_t(n_test));
  out.train_stimuli.insert(stimuli.begin() + std::ptrdiff_t(n_test), stimuli.end());
  return out;
}

/// Text form: "seed <n>" then one "train <id>" or "test <id>" line per stimulus.
inline void write_split(std::ostream& out, const DatasetSplit& s) {
  out << "seed " << s.seed << '\n';
  for (const auto& id : s.train_stimuli) out << "train " << id << '\n';
  for (const auto& id : s.test_stimuli) out << "test " << id << '\n';
}

inline DatasetSplit read_split(std::istream& in) {
  DatasetSplit s;
  std::string kind, id;
  while (in >> kind >> id) {
    if (kind == "seed") s.seed = std::stoull(id);
    else if (kind == "train") s.train_stimuli.insert(id);
    else if (kind == "test") s.test_stimuli.insert(id);
    else throw FormatError("split file: unknown entry '" + kind + "'");
  }
  for (const auto& id : s.test_stimuli)
    if (s.train_stimuli.count(id)) throw DataError("split file: stimulus " + id + " in both train and test");
  return s;
}

inline constexpr std::uint32_t kTrajectoryStoreVersion = 1;

inline std::vector<std::uint8_t> encode_trajectories(const std::vector<Trajectory>& trajs) {
  io::ByteWriter w;
  w.put_bytes("GZTR");
  w.put<std::uint32_t>(kTrajectoryStoreVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(trajs.size()));
  for (const auto& t : trajs) {
    w.put_string16(t.stimulus_id);
    w.put_string16(t.subject_id);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.coords.size()));
    for (const auto& p : t.coords) {
      w.put<float>(float(p.x));
      w.put<float>(float(p.y));
    }
  }
  return w.bytes();
}

inline std::vector<Trajectory> decode_trajectories(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (r.get_bytes(4) != "GZTR") throw FormatError("trajectory store: bad magic");
  if (const auto v = r.get<std::uint32_t>(); v != kTrajectoryStoreVersion)
    throw FormatError("trajectory store: unsupported version " + std::to_string(v));
  const auto count = r.get<std::uint32_t>();
  std::vector<Trajectory> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Trajectory t;
    t.stimulus_id = r.get_string16();
    t.subject_id = r.get_string16();
    const auto len = r.get<std::uint32_t>();
    const auto raw = r.get_array<float>(std::size_t(len) * 2);
    t.coords.resize(len);
    for (std::size_t k = 0; k < len; ++k) {
      t.coords[k] = {raw[2 * k], raw[2 * k + 1]};
      if (!std::isfinite(t.coords[k].x) || !std::isfinite(t.coords[k].y))
        throw DataError("trajectory store: non-finite coordinate in " + t.stimulus_id);
    }
    out.push_back(std::move(t));
  }
  if (!r.done()) throw FormatError("trajectory store: trailing bytes");
  return out;
}

inline void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajs) {
  io::write_file(path, encode_trajectories(trajs));
}

inline std::vector<Trajectory> load_trajectories(const std::string& path) {
  return decode_trajectories(io::read_file(path));
}

/// One row per recording of the dataset manifest:
///   stimulus_id,image_path,width,height,subject_id,recording_path
/// Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string stimulus_id;
  std::string image_path;
  FrameSize size;
  std::string subject_id;
  std::string recording_path;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  };
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.rfind("stimulus_id,", 0) == 0) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw FormatError("manifest line " + std::to_string(lineno) + ": expected 6 fields");
    ManifestEntry e;
    e.stimulus_id = f[0];
    e.image_path = resolve(f[1]);
    e.size.width = std::stoul(f[2]);
    e.size.height = std::stoul(f[3]);
    e.subject_id = f[4];
    e.recording_path = resolve(f[5]);
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_manifest_header(std::ostream& out) {
  out << "stimulus_id,image_path,width,height,subject_id,recording_path\n";
}

}  // namespace gazediff
