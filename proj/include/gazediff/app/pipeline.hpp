#pragma once

// Command implementations behind the gazediff CLI. Each returns a summary with
// per-item failures instead of aborting, so callers can report and set the exit
// code. Directory layout:
//   data dir:  trajectories.gztr, split.txt
//   features:  <stimulus_id>.gzfg
//   run dir:   config.txt, model.gzck, loss.csv
//   samples:   <stimulus_id>_sNN.gztr (one trajectory each)

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gazediff/app/config.hpp"
#include "gazediff/app/parallel.hpp"
#include "gazediff/core/checkpoint.hpp"
#include "gazediff/data/gaze_data.hpp"
#include "gazediff/data/synthetic.hpp"
#include "gazediff/diffusion/diffusion.hpp"
#include "gazediff/events/fixations.hpp"
#include "gazediff/events/saliency.hpp"
#include "gazediff/events/stats.hpp"
#include "gazediff/features/feature_grid.hpp"
#include "gazediff/metrics/report.hpp"
#include "gazediff/metrics/saliency_metrics.hpp"
#include "gazediff/metrics/sequence_metrics.hpp"

namespace gazediff {

namespace fs = std::filesystem;

using Logger = std::function<void(const std::string&)>;

inline Logger stderr_logger() {
  return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

struct ItemFailure {
  std::string item;
  std::string reason;
};

struct CommandSummary {
  std::string command;
  std::size_t processed = 0;
  std::vector<ItemFailure> failures;
  nlohmann::json details = nlohmann::json::object();

  bool ok() const { return failures.empty(); }

  nlohmann::json to_json() const {
    nlohmann::json j{{"command", command}, {"processed", processed}, {"failed", failures.size()}, {"details", details}};
    j["failures"] = nlohmann::json::array();
    for (const auto& f : failures) j["failures"].push_back({{"item", f.item}, {"reason", f.reason}});
    return j;
  }
};

inline constexpr const char* kTrajectoryFile = "trajectories.gztr";
inline constexpr const char* kSplitFile = "split.txt";
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kModelFile = "model.gzck";
inline constexpr const char* kLossFile = "loss.csv";

inline fs::path feature_path(const fs::path& dir, const std::string& stimulus_id) { return dir / (stimulus_id + ".gzfg"); }

/// A .gztr file, or every .gztr file of a directory in name order.
inline std::vector<Trajectory> load_trajectory_set(const fs::path& path) {
  if (!fs::is_directory(path)) return load_trajectories(path.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file() && e.path().extension() == ".gztr") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Trajectory> out;
  for (const auto& f : files) {
    auto part = load_trajectories(f.string());
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

inline std::map<std::string, std::vector<Trajectory>> group_by_stimulus(std::vector<Trajectory> trajs) {
  std::map<std::string, std::vector<Trajectory>> out;
  for (auto& t : trajs) out[t.stimulus_id].push_back(std::move(t));
  return out;
}

inline DatasetSplit load_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split file " + path.string());
  return read_split(in);
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

/// Loads and checks a checkpoint against the parameter layout of `model`.
inline ParameterStore<float> load_model_parameters(const fs::path& path, const Denoiser<float>& model) {
  auto store = load_checkpoint<float>(path.string());
  const auto expected = model.init_parameters(0);
  if (store.count() != expected.count())
    throw FormatError(path.string() + ": " + std::to_string(store.count()) + " tensors, model expects " + std::to_string(expected.count()));
  for (const auto& [name, t] : expected.entries()) {
    if (!store.contains(name)) throw FormatError(path.string() + ": missing parameter " + name);
    require_shape(store.at(name).shape, t.shape, ("checkpoint parameter " + name).c_str());
  }
  return store;
}

// ---------------------------------------------------------------- synth-data

struct SynthDataSummary {
  CommandSummary summary;
  std::vector<SyntheticStimulus> stimuli;
};

/// Desk-scale settings matched to the synthetic corpus.
inline RunConfig synthetic_run_config(const SyntheticOptions& o) {
  RunConfig c;
  c.model.traj_len = o.samples_per_recording;
  c.model.depth = 2;
  c.model.channels = {32, 64};
  c.model.embed_dim = 32;
  c.model.feature_dim = o.feature_dim;
  c.model.grid_h = o.grid_h;
  c.model.grid_w = o.grid_w;
  c.model.frame = o.frame;
  c.lr = 1e-3;
  c.max_steps = 5000;
  c.rate_hz = o.rate_hz();
  c.test_fraction = 0.2;
  return c;
}

/// Writes manifest.csv, recordings/, features/, features_swapped/ (salient and
/// distractor signatures exchanged), blobs.csv and a matching config.txt, with
/// `overrides` applied on top of the synthetic defaults.
inline SynthDataSummary run_synth_data(const fs::path& out, const SyntheticOptions& o,
                                       const std::map<std::string, std::string>& overrides = {}, const Logger& log = stderr_logger()) {
  RunConfig run_cfg = synthetic_run_config(o);
  apply_config(run_cfg, overrides);
  run_cfg.validate();
  fs::create_directories(out / "recordings");
  fs::create_directories(out / "features");
  fs::create_directories(out / "features_swapped");
  SynthDataSummary r;
  r.summary.command = "synth-data";
  r.stimuli = make_two_blob_dataset(o);
  std::ofstream manifest(out / "manifest.csv"), blobs(out / "blobs.csv");
  if (!manifest || !blobs) throw std::runtime_error("cannot write into " + out.string());
  write_manifest_header(manifest);
  blobs << "stimulus_id,salient_x,salient_y,distractor_x,distractor_y,sigma_px\n";
  blobs.precision(17);
  for (const auto& s : r.stimuli) {
    save_grid(feature_path(out / "features", s.id).string(), s.grid);
    save_grid(feature_path(out / "features_swapped", s.id).string(), s.swapped_grid);
    blobs << s.id << ',' << s.salient_px.x << ',' << s.salient_px.y << ',' << s.distractor_px.x << ',' << s.distractor_px.y << ','
          << s.sigma_px << '\n';
    for (const auto& rec : s.recordings) {
      const std::string rel = "recordings/" + s.id + "_" + rec.subject_id + ".csv";
      std::ofstream rf(out / rel);
      write_recording(rf, rec);
      manifest << s.id << ",," << o.frame.width << ',' << o.frame.height << ',' << rec.subject_id << ',' << rel << '\n';
      ++r.summary.processed;
    }
  }
  write_text(out / kConfigFile, dump_config(run_cfg));
  log("synth-data: " + std::to_string(r.stimuli.size()) + " stimuli, " + std::to_string(r.summary.processed) + " recordings");
  r.summary.details["stimuli"] = r.stimuli.size();
  return r;
}

struct BlobTruth {
  Point salient;
  Point distractor;
  double sigma_px = 0;
};

inline std::map<std::string, BlobTruth> read_blobs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, BlobTruth> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw FormatError(path.string() + ": expected 6 fields");
    out[f[0]] = {{std::stod(f[1]), std::stod(f[2])}, {std::stod(f[3]), std::stod(f[4])}, std::stod(f[5])};
  }
  return out;
}

// ---------------------------------------------------------------- preprocess

/// Manifest recordings to fixed-length trajectories plus a stimulus-level split.
inline CommandSummary run_preprocess(const fs::path& manifest_path, const fs::path& out, const RunConfig& cfg,
                                     const Logger& log = stderr_logger()) {
  CommandSummary s;
  s.command = "preprocess";
  const auto entries = read_manifest(manifest_path.string());
  std::vector<Trajectory> trajs;
  std::size_t rejected = 0;
  for (const auto& e : entries) {
    const std::string item = e.stimulus_id + "/" + e.subject_id;
    try {
      const auto rec = load_recording(e.recording_path, e.subject_id, e.stimulus_id);
      auto res = preprocess(rec, e.size, cfg.preprocess());
      if (!res.trajectory) {
        ++rejected;
        log("preprocess: dropped " + item + ": " + res.rejection);
        continue;
      }
      trajs.push_back(std::move(*res.trajectory));
      ++s.processed;
    } catch (const std::exception& ex) {
      s.failures.push_back({item, ex.what()});
      log("preprocess: failed " + item + ": " + ex.what());
    }
  }
  if (trajs.empty()) throw DataError("preprocess: no usable recordings in " + manifest_path.string());
  fs::create_directories(out);
  save_trajectories((out / kTrajectoryFile).string(), trajs);
  std::vector<std::string> stimuli;
  for (const auto& t : trajs) stimuli.push_back(t.stimulus_id);
  const auto sp = split(stimuli, cfg.split_seed, cfg.test_fraction);
  std::ofstream so(out / kSplitFile);
  write_split(so, sp);
  s.details = {{"trajectories", trajs.size()}, {"rejected", rejected}, {"train_stimuli", sp.train_stimuli.size()},
               {"test_stimuli", sp.test_stimuli.size()}};
  log("preprocess: " + std::to_string(trajs.size()) + " trajectories, " + std::to_string(rejected) + " rejected");
  return s;
}

// ---------------------------------------------------------------- train

/// Loads standardized feature tokens for each stimulus; missing or mismatched grids
/// become failures and the stimulus is left out.
inline std::map<std::string, std::vector<float>> load_feature_tokens(const fs::path& dir, const std::set<std::string>& stimuli,
                                                                      const DenoiserConfig& model, CommandSummary& s,
                                                                      const Logger& log) {
  std::map<std::string, std::vector<float>> out;
  for (const auto& id : stimuli) {
    const auto path = feature_path(dir, id);
    try {
      if (!fs::exists(path)) throw DataError("missing feature grid " + path.string());
      auto grid = load_grid(path.string());
      if (grid.stimulus_id != id) throw DataError(path.string() + " is labelled '" + grid.stimulus_id + "'");
      out[id] = feature_tokens<float>(standardize(std::move(grid)), model);
    } catch (const std::exception& ex) {
      s.failures.push_back({id, ex.what()});
      log("skipping stimulus " + id + ": " + ex.what());
    }
  }
  return out;
}

/// Trains on the train split. Stops after `epochs` or `max_steps` (when nonzero).
inline CommandSummary run_train(const fs::path& data_dir, const fs::path& features_dir, const fs::path& run_dir, const RunConfig& cfg,
                                const Logger& log = stderr_logger()) {
  cfg.validate();
  CommandSummary s;
  s.command = "train";
  const auto split_info = load_split(data_dir / kSplitFile);
  auto all = load_trajectories((data_dir / kTrajectoryFile).string());
  Denoiser<float> model(cfg.model);
  const auto tokens = load_feature_tokens(features_dir, split_info.train_stimuli, cfg.model, s, log);

  std::vector<Trajectory> train;
  for (auto& t : all)
    if (split_info.train_stimuli.count(t.stimulus_id) && tokens.count(t.stimulus_id)) {
      if (t.coords.size() != cfg.model.traj_len)
        throw ConfigError("trajectory length " + std::to_string(t.coords.size()) + " conflicts with traj_len " +
                          std::to_string(cfg.model.traj_len));
      train.push_back(std::move(t));
    }
  if (train.empty()) throw DataError("train: no training trajectories with feature grids");
  std::vector<Conditioned<float>> items;
  for (const auto& t : train) items.push_back({&t.coords, &tokens.at(t.stimulus_id)});

  fs::create_directories(run_dir);
  write_text(run_dir / kConfigFile, dump_config(cfg));
  auto params = model.init_parameters(cfg.seed);
  const auto schedule = cfg.schedule();
  TrainOptions opts{cfg.lr, cfg.batch, cfg.seed, cfg.guidance()};
  Trainer<float> trainer(model, params, schedule, opts);
  std::mt19937_64 order_rng(cfg.seed ^ 0x5851F42D4C957F2Dull);
  std::ofstream loss_log(run_dir / kLossFile);
  loss_log << "step,epoch,loss\n";
  loss_log.precision(9);
  std::vector<std::size_t> order(items.size());
  std::size_t step = 0;
  double last = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; epoch < cfg.epochs && (cfg.max_steps == 0 || step < cfg.max_steps); ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t b = 0; b < order.size() && (cfg.max_steps == 0 || step < cfg.max_steps); b += cfg.batch) {
      std::vector<Conditioned<float>> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch); ++k) batch.push_back(items[order[k]]);
      last = trainer.step(batch);
      ++step;
      loss_log << step << ',' << epoch << ',' << last << '\n';
      if (step % 100 == 0) log("train: step " + std::to_string(step) + " loss " + std::to_string(last));
      if (cfg.checkpoint_every && step % cfg.checkpoint_every == 0)
        save_checkpoint((run_dir / ("model_step" + std::to_string(step) + ".gzck")).string(), params);
    }
  }
  save_checkpoint((run_dir / kModelFile).string(), params);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  s.processed = train.size();
  s.details = {{"steps", step}, {"final_loss", last}, {"seconds", secs}, {"parameters", params.total_size()}};
  log("train: " + std::to_string(step) + " steps in " + std::to_string(secs) + " s, final loss " + std::to_string(last));
  return s;
}

// ---------------------------------------------------------------- sample

inline std::string sample_file_name(const std::string& stimulus_id, std::size_t k) {
  std::string n = std::to_string(k);
  return stimulus_id + "_s" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n + ".gztr";
}

/// N guided samples per test stimulus, seeded per stimulus so output does not
/// depend on worker count or ordering.
inline CommandSummary run_sample(const fs::path& run_dir, const std::set<std::string>& stimuli, const fs::path& features_dir,
                                 const fs::path& out, const RunConfig& cfg, std::size_t workers, const Logger& log = stderr_logger()) {
  cfg.validate();
  CommandSummary s;
  s.command = "sample";
  Denoiser<float> model(cfg.model);
  const auto params = load_model_parameters(run_dir / kModelFile, model);
  const auto schedule = cfg.schedule();
  Sampler<float> sampler(model, params, schedule, cfg.guidance());
  const auto tokens = load_feature_tokens(features_dir, stimuli, cfg.model, s, log);
  std::vector<std::string> ids;
  for (const auto& [id, _] : tokens) ids.push_back(id);
  fs::create_directories(out);
  std::mutex log_mutex;
  const auto errors = parallel_for(ids.size(), workers, [&](std::size_t i) {
    const auto& id = ids[i];
    std::vector<const std::vector<float>*> cond(cfg.samples_per_stimulus, &tokens.at(id));
    const auto seed = item_seed(cfg.seed, id);
    const auto trajs = cfg.sampler == "ddpm" ? sampler.ddpm(cond, seed) : sampler.ddim(cond, cfg.ddim_steps, seed);
    for (std::size_t k = 0; k < trajs.size(); ++k)
      save_trajectories((out / sample_file_name(id, k)).string(), {Trajectory{id, "s" + std::to_string(k), trajs[k]}});
    std::lock_guard lock(log_mutex);
    log("sample: " + id + " done");
  });
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errors[i].empty()) ++s.processed;
    else s.failures.push_back({ids[i], errors[i]});
  }
  s.details = {{"stimuli", ids.size()}, {"per_stimulus", cfg.samples_per_stimulus}, {"files", s.processed * cfg.samples_per_stimulus}};
  return s;
}

// ---------------------------------------------------------------- extract / saliency

inline Scanpath scanpath_of(const Trajectory& t, const RunConfig& cfg) {
  return {t.stimulus_id, extract_fixations(denormalize(t.coords, cfg.model.frame), cfg.rate_hz, cfg.fixation)};
}

inline std::string scanpath_file_name(const Trajectory& t) { return t.stimulus_id + "__" + t.subject_id + ".txt"; }

inline CommandSummary run_extract(const fs::path& input, const fs::path& out, const RunConfig& cfg, const Logger& log = stderr_logger()) {
  CommandSummary s;
  s.command = "extract";
  fs::create_directories(out);
  std::size_t fixations = 0;
  for (const auto& t : load_trajectory_set(input)) {
    try {
      const auto sp = scanpath_of(t, cfg);
      write_scanpath(out / scanpath_file_name(t), sp);
      fixations += sp.fixations.size();
      ++s.processed;
    } catch (const std::exception& ex) {
      s.failures.push_back({t.stimulus_id + "/" + t.subject_id, ex.what()});
    }
  }
  s.details = {{"fixations", fixations}};
  log("extract: " + std::to_string(s.processed) + " scanpaths, " + std::to_string(fixations) + " fixations");
  return s;
}

/// Scanpath files of a directory grouped by stimulus (the part of the name before "__").
inline std::map<std::string, std::vector<Scanpath>> load_scanpath_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::map<std::string, std::vector<Scanpath>> out;
  for (const auto& f : files) {
    auto sp = read_scanpath(f);
    if (sp.stimulus_id.empty()) {
      const auto name = f.stem().string();
      sp.stimulus_id = name.substr(0, name.find("__"));
    }
    out[sp.stimulus_id].push_back(std::move(sp));
  }
  return out;
}

inline CommandSummary run_saliency(const fs::path& scanpath_dir, const fs::path& out, const RunConfig& cfg,
                                   const Logger& log = stderr_logger()) {
  CommandSummary s;
  s.command = "saliency";
  fs::create_directories(out);
  for (const auto& [id, sps] : load_scanpath_dir(scanpath_dir)) {
    try {
      const auto map = build_saliency(sps, cfg.model.frame.height, cfg.model.frame.width, cfg.saliency_sigma);
      write_pfm(out / (id + ".pfm"), map);
      write_pgm(out / (id + ".pgm"), map);
      ++s.processed;
    } catch (const std::exception& ex) {
      s.failures.push_back({id, ex.what()});
    }
  }
  log("saliency: " + std::to_string(s.processed) + " maps");
  return s;
}

// ---------------------------------------------------------------- evaluate

namespace detail {

/// Distance matrix where pairs the metric cannot compare are skipped: a generated
/// sequence incomparable to a ground truth is dropped from that row, and rows left
/// empty are dropped. Returns nullopt when nothing is comparable.
template <class Metric, class Comparable>
std::optional<metrics::BestMean> aggregate_comparable(const std::vector<PointSequence>& gt, const std::vector<PointSequence>& gen,
                                                      Metric&& metric, Comparable&& comparable) {
  std::vector<std::vector<double>> rows;
  for (const auto& g : gt) {
    std::vector<double> row;
    for (const auto& s : gen)
      if (comparable(g, s)) row.push_back(double(metric(g, s)));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) return std::nullopt;
  return metrics::aggregate(rows);
}

}  // namespace detail

struct EvaluateResult {
  CommandSummary summary;
  metrics::MetricReport report;
};

/// Per image: the four distances on scanpaths (fixation centroids) and on raw
/// trajectories, each aggregated to best/mean, plus the six saliency metrics of
/// the generated fixation map against the ground-truth one.
inline EvaluateResult run_evaluate(const std::vector<Trajectory>& gt, const std::vector<Trajectory>& gen, const std::string& dataset,
                                   const RunConfig& cfg, std::size_t workers, const Logger& log = stderr_logger()) {
  EvaluateResult r;
  r.summary.command = "evaluate";
  const auto gt_by = group_by_stimulus(gt);
  const auto gen_by = group_by_stimulus(gen);
  std::vector<std::string> ids;
  for (const auto& [id, _] : gen_by) {
    if (gt_by.count(id)) ids.push_back(id);
    else r.summary.failures.push_back({id, "no ground-truth trajectories"});
  }
  metrics::CellGrid grid = cfg.lev_grid;
  grid.frame = cfg.model.frame;
  const std::size_t k = cfg.tde_k, stride = cfg.tde_stride;
  std::vector<std::vector<metrics::ReportRow>> rows(ids.size());
  std::vector<std::vector<std::string>> notes(ids.size());

  const auto errors = parallel_for(ids.size(), workers, [&](std::size_t i) {
    const auto& id = ids[i];
    std::vector<PointSequence> gt_traj, gen_traj, gt_scan, gen_scan;
    std::vector<Scanpath> gt_sp, gen_sp;
    for (const auto& t : gt_by.at(id)) {
      gt_traj.push_back(denormalize(t.coords, cfg.model.frame));
      gt_sp.push_back(scanpath_of(t, cfg));
      gt_scan.push_back(gt_sp.back().points());
    }
    for (const auto& t : gen_by.at(id)) {
      gen_traj.push_back(denormalize(t.coords, cfg.model.frame));
      gen_sp.push_back(scanpath_of(t, cfg));
      gen_scan.push_back(gen_sp.back().points());
    }
    const auto any = [](const PointSequence&, const PointSequence&) { return true; };
    const auto nonempty = [](const PointSequence& a, const PointSequence& b) { return !a.empty() && !b.empty(); };
    const auto long_enough = [k](const PointSequence& a, const PointSequence& b) { return a.size() >= k && b.size() >= k; };
    const auto lev = [&grid](const PointSequence& a, const PointSequence& b) { return metrics::levenshtein(a, b, grid); };
    const auto tde = [k, stride](const PointSequence& a, const PointSequence& b) { return metrics::tde(a, b, k, stride); };
    const auto dtw = [](const PointSequence& a, const PointSequence& b) { return metrics::dtw(a, b); };
    const auto dfd = [](const PointSequence& a, const PointSequence& b) { return metrics::frechet(a, b); };
    const auto add = [&](const std::string& name, const std::optional<metrics::BestMean>& v) {
      if (v) rows[i].push_back({dataset, id, name, v->mean, v->best});
      else notes[i].push_back(name + ": no comparable pairs");
    };
    for (const auto& [prefix, a, b] : {std::tuple{"scanpath", &gt_scan, &gen_scan}, std::tuple{"trajectory", &gt_traj, &gen_traj}}) {
      const std::string p = prefix;
      add(p + "_levenshtein", detail::aggregate_comparable(*a, *b, lev, any));
      add(p + "_dtw", detail::aggregate_comparable(*a, *b, dtw, nonempty));
      add(p + "_frechet", detail::aggregate_comparable(*a, *b, dfd, nonempty));
      add(p + "_tde", detail::aggregate_comparable(*a, *b, tde, long_enough));
    }
    const auto h = cfg.model.frame.height, w = cfg.model.frame.width;
    const auto gt_fix = fixation_pixels(gt_sp, h, w);
    const auto gen_fix = fixation_pixels(gen_sp, h, w);
    if (gt_fix.empty() || gen_fix.empty()) {
      notes[i].push_back("saliency: no fixations");
      return;
    }
    const auto gt_map = build_saliency(gt_sp, h, w, cfg.saliency_sigma);
    const auto gen_map = build_saliency(gen_sp, h, w, cfg.saliency_sigma);
    metrics::SaliencyMetricOptions mo;
    mo.kl_epsilon = cfg.kl_epsilon;
    mo.borji_splits = cfg.auc_splits;
    mo.borji_seed = item_seed(cfg.seed, id);
    const auto sc = metrics::saliency_metrics(gen_map, gt_map, gt_fix, mo);
    for (const auto& [name, v] : {std::pair{"saliency_auc_judd", sc.auc_judd}, std::pair{"saliency_auc_borji", sc.auc_borji},
                                  std::pair{"saliency_nss", sc.nss}, std::pair{"saliency_sim", sc.sim},
                                  std::pair{"saliency_cc", sc.cc}, std::pair{"saliency_kl", sc.kl}})
      rows[i].push_back({dataset, id, name, v, v});
    if (sc.degenerate_prediction) notes[i].push_back("saliency: flat prediction, NSS/CC set to 0");
  });
  nlohmann::json note_json = nlohmann::json::object();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!errors[i].empty()) {
      r.summary.failures.push_back({ids[i], errors[i]});
      continue;
    }
    for (auto& row : rows[i]) r.report.add(std::move(row));
    if (!notes[i].empty()) note_json[ids[i]] = notes[i];
    ++r.summary.processed;
  }
  r.summary.details = r.report.summary();
  r.summary.details["notes"] = note_json;
  log("evaluate: " + std::to_string(r.summary.processed) + " images, " + std::to_string(r.report.rows().size()) + " rows");
  return r;
}

// ---------------------------------------------------------------- stats

struct StatsResult {
  CommandSummary summary;
  Histogram amplitude;
  Histogram direction;
  Histogram saccade_angle;
};

inline StatsResult compute_stats(const std::vector<Scanpath>& scanpaths, const RunConfig& cfg) {
  StatsResult r;
  r.summary.command = "stats";
  const auto st = scanpath_stats(scanpaths);
  const double diag = std::hypot(double(cfg.model.frame.width), double(cfg.model.frame.height));
  r.amplitude = amplitude_histogram(st.amplitudes, diag, cfg.amplitude_bins);
  r.direction = angle_histogram(st.directions, cfg.angle_bins);
  r.saccade_angle = angle_histogram(st.saccade_angles, cfg.angle_bins);
  r.summary.processed = scanpaths.size();
  r.summary.details = {{"saccades", st.amplitudes.size()}, {"directions", st.directions.size()}, {"angles", st.saccade_angles.size()}};
  return r;
}

/// Input is a trajectory set (fixations extracted here) or a scanpath directory.
inline StatsResult run_stats(const fs::path& input, const fs::path& out, const RunConfig& cfg, const Logger& log = stderr_logger()) {
  std::vector<Scanpath> sps;
  const bool scanpath_dir = fs::is_directory(input) && [&] {
    for (const auto& e : fs::directory_iterator(input))
      if (e.path().extension() == ".txt") return true;
    return false;
  }();
  if (scanpath_dir) {
    for (auto& [_, v] : load_scanpath_dir(input)) sps.insert(sps.end(), v.begin(), v.end());
  } else {
    for (const auto& t : load_trajectory_set(input)) sps.push_back(scanpath_of(t, cfg));
  }
  auto r = compute_stats(sps, cfg);
  fs::create_directories(out);
  for (const auto& [name, h] : {std::pair{"amplitude", &r.amplitude}, std::pair{"direction", &r.direction},
                                std::pair{"inter_saccade_angle", &r.saccade_angle}}) {
    std::ofstream os(out / (std::string(name) + ".csv"));
    os << "panel,bin_center,count\n";
    write_histogram_csv(os, name, *h);
  }
  log("stats: " + std::to_string(sps.size()) + " scanpaths");
  return r;
}

}  // namespace gazediff
