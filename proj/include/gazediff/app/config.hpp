#pragma once

// Run configuration: "key = value" lines, '#' comments. Every key below is
// consumed somewhere; unknown keys and conflicting values are errors.

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gazediff/core/errors.hpp"
#include "gazediff/data/gaze_data.hpp"
#include "gazediff/diffusion/diffusion.hpp"
#include "gazediff/events/fixations.hpp"
#include "gazediff/metrics/sequence_metrics.hpp"
#include "gazediff/model/denoiser.hpp"

namespace gazediff {

struct RunConfig {
  // diffusion and training
  std::size_t T_diff = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  std::size_t ddim_steps = 50;
  double cfg_scale = 4.0;
  double uncond_dropout = 0.10;
  double lr = 1e-4;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  std::size_t epochs = 3000;
  std::size_t max_steps = 0;  // 0: no cap, run all epochs
  std::size_t checkpoint_every = 0;
  std::string sampler = "ddim";
  std::size_t samples_per_stimulus = 15;

  DenoiserConfig model;

  // data
  double rate_hz = 240.0;
  double oob_margin = 0.05;
  double truncate_ratio = 1.05;
  bool truncate_keep_head = true;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;

  // events and metrics
  FixationParams fixation;
  double saliency_sigma = 25.0;
  metrics::CellGrid lev_grid;
  std::size_t tde_k = 5;
  std::size_t tde_stride = 1;
  std::size_t auc_splits = 100;
  double kl_epsilon = 1e-7;
  std::size_t amplitude_bins = 30;
  std::size_t angle_bins = 36;

  DiffusionSchedule schedule() const { return DiffusionSchedule(T_diff, beta_start, beta_end); }
  GuidanceConfig guidance() const { return {cfg_scale, uncond_dropout}; }
  PreprocessOptions preprocess() const { return {model.traj_len, oob_margin, truncate_ratio, truncate_keep_head}; }

  void validate() const {
    model.validate();
    schedule();
    if (ddim_steps == 0 || ddim_steps > T_diff) throw ConfigError("ddim_steps must be in [1, T_diff]");
    if (!(uncond_dropout >= 0 && uncond_dropout <= 1)) throw ConfigError("uncond_dropout must be in [0, 1]");
    if (!(lr > 0)) throw ConfigError("lr must be positive");
    if (batch == 0) throw ConfigError("batch must be >= 1");
    if (sampler != "ddim" && sampler != "ddpm") throw ConfigError("sampler must be ddim or ddpm");
    if (samples_per_stimulus == 0) throw ConfigError("samples_per_stimulus must be >= 1");
    if (!(rate_hz > 0)) throw ConfigError("rate_hz must be positive");
    if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("test_fraction must be in (0, 1)");
    if (!(fixation.dispersion_px > 0 && fixation.min_duration_s > 0)) throw ConfigError("fixation thresholds must be positive");
    if (!(saliency_sigma > 0)) throw ConfigError("saliency_sigma must be positive");
    if (lev_grid.rows == 0 || lev_grid.cols == 0) throw ConfigError("lev grid dims must be >= 1");
    if (tde_k == 0 || tde_stride == 0) throw ConfigError("tde_k and tde_stride must be >= 1");
    if (auc_splits == 0) throw ConfigError("auc_splits must be >= 1");
    if (amplitude_bins == 0 || angle_bins == 0) throw ConfigError("histogram bins must be >= 1");
  }
};

namespace detail {

template <class U>
U parse_value(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  U out{};
  if constexpr (std::is_same_v<U, bool>) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
  } else {
    if (!(is >> out) || !(is >> std::ws).eof()) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
    if constexpr (std::is_unsigned_v<U>)
      if (v.find('-') != std::string::npos) throw ConfigError("config key '" + key + "': must be non-negative");
  }
  return out;
}

template <class U>
std::string format_value(const U& v) {
  if constexpr (std::is_same_v<U, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<U>) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, r.ptr);
  } else {
    return std::to_string(v);
  }
}

}  // namespace detail

/// Key table binding names to RunConfig fields, used for parsing and dumping.
class ConfigKeys {
 public:
  explicit ConfigKeys(RunConfig& c) {
    bind("T_diff", c.T_diff);
    bind("beta_start", c.beta_start);
    bind("beta_end", c.beta_end);
    bind("ddim_steps", c.ddim_steps);
    bind("cfg_scale", c.cfg_scale);
    bind("uncond_dropout", c.uncond_dropout);
    bind("lr", c.lr);
    bind("batch", c.batch);
    bind("seed", c.seed);
    bind("epochs", c.epochs);
    bind("max_steps", c.max_steps);
    bind("checkpoint_every", c.checkpoint_every);
    bind("sampler", c.sampler);
    bind("samples_per_stimulus", c.samples_per_stimulus);
    bind("traj_len", c.model.traj_len);
    bind("depth", c.model.depth);
    bind("heads", c.model.heads);
    bind("embed_dim", c.model.embed_dim);
    bind("feature_dim", c.model.feature_dim);
    bind("grid_h", c.model.grid_h);
    bind("grid_w", c.model.grid_w);
    bind("frame_h", c.model.frame.height);
    bind("frame_w", c.model.frame.width);
    bind("use_cpe", c.model.use_cpe);
    bind("patch_level", c.model.patch_level);
    bind("uncond_keeps_cpe", c.model.uncond_keeps_cpe);
    entries_["channels"] = {[&c](const std::string& v) {
                              c.model.channels.clear();
                              std::istringstream is(v);
                              std::string item;
                              while (std::getline(is, item, ',')) c.model.channels.push_back(detail::parse_value<std::size_t>("channels", item));
                              c.model.depth = c.model.channels.size();
                            },
                            [&c] {
                              std::string s;
                              for (std::size_t i = 0; i < c.model.channels.size(); ++i) s += (i ? "," : "") + std::to_string(c.model.channels[i]);
                              return s;
                            }};
    entries_["cross_attention"] = {[&c](const std::string& v) { c.model.cross_attention = parse_cross_attention(v); },
                                   [&c] { return std::string(to_string(c.model.cross_attention)); }};
    bind("rate_hz", c.rate_hz);
    bind("oob_margin", c.oob_margin);
    bind("truncate_ratio", c.truncate_ratio);
    bind("truncate_keep_head", c.truncate_keep_head);
    bind("test_fraction", c.test_fraction);
    bind("split_seed", c.split_seed);
    bind("disp_thresh", c.fixation.dispersion_px);
    bind("min_fix_duration", c.fixation.min_duration_s);
    bind("saliency_sigma", c.saliency_sigma);
    bind("lev_rows", c.lev_grid.rows);
    bind("lev_cols", c.lev_grid.cols);
    bind("tde_k", c.tde_k);
    bind("tde_stride", c.tde_stride);
    bind("auc_splits", c.auc_splits);
    bind("kl_epsilon", c.kl_epsilon);
    bind("amplitude_bins", c.amplitude_bins);
    bind("angle_bins", c.angle_bins);
  }

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(value);
  }

  std::string get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second.get();
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
  }

 private:
  struct Entry {
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
  };

  template <class U>
  void bind(const std::string& key, U& field) {
    entries_[key] = {[key, &field](const std::string& v) {
                       if constexpr (std::is_same_v<U, std::string>) field = v;
                       else field = detail::parse_value<U>(key, v);
                     },
                     [&field] {
                       if constexpr (std::is_same_v<U, std::string>) return field;
                       else return detail::format_value(field);
                     }};
  }

  std::map<std::string, Entry> entries_;
};

/// Parses "key = value" lines. A key given twice with different values is a conflict.
inline std::map<std::string, std::string> parse_config_text(std::istream& in, const std::string& origin = "config") {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (auto it = out.find(key); it != out.end() && it->second != value)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": conflicting values for '" + key + "'");
    out[key] = value;
  }
  return out;
}

/// Applies entries in key order except `channels`, which goes first so an explicit
/// `depth` must agree with it.
inline void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& entries) {
  ConfigKeys keys(cfg);
  for (const auto& [k, _] : entries)
    if (!keys.contains(k)) throw ConfigError("unknown config key '" + k + "'");
  if (auto it = entries.find("channels"); it != entries.end()) keys.set("channels", it->second);
  for (const auto& [k, v] : entries)
    if (k != "channels") keys.set(k, v);
  if (entries.count("channels") && entries.count("depth") && cfg.model.depth != cfg.model.channels.size())
    throw ConfigError("depth " + std::to_string(cfg.model.depth) + " conflicts with " + std::to_string(cfg.model.channels.size()) + " channel levels");
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  RunConfig cfg;
  apply_config(cfg, parse_config_text(in, path));
  return cfg;
}

inline std::string dump_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  ConfigKeys keys(copy);
  std::ostringstream os;
  for (const auto& k : keys.keys()) os << k << " = " << keys.get(k) << '\n';
  return os.str();
}

}  // namespace gazediff
