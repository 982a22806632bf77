// gazediff: preprocess | train | sample | extract | saliency | evaluate | stats | synth-data

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "gazediff/app/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gazediff;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t workers = 1;
  bool json = false;
};

/// Relative inputs that do not exist from the working directory fall back to
/// GAZEDIFF_DATA_DIR; an empty path means the data root itself.
fs::path resolve_input(const std::string& p) {
  const char* root = std::getenv("GAZEDIFF_DATA_DIR");
  if (p.empty()) {
    if (!root) throw ConfigError("no path given and GAZEDIFF_DATA_DIR is unset");
    return root;
  }
  fs::path path(p);
  if (root && path.is_relative() && !fs::exists(path)) return fs::path(root) / path;
  return path;
}

std::map<std::string, std::string> overrides(const Common& c) {
  std::map<std::string, std::string> out;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

/// defaults < base file < --config < --set < --seed
RunConfig build_config(const Common& c, const fs::path& base = {}) {
  RunConfig cfg;
  if (!base.empty()) cfg = load_config(base.string());
  if (!c.config.empty()) {
    std::ifstream in(resolve_input(c.config));
    if (!in) throw ConfigError("cannot open config " + c.config);
    apply_config(cfg, parse_config_text(in, c.config));
  }
  apply_config(cfg, overrides(c));
  if (c.seed_given) cfg.seed = c.seed;
  cfg.validate();
  return cfg;
}

void require_same_model(const RunConfig& trained, const RunConfig& now) {
  RunConfig t = trained, n = now;
  ConfigKeys kt(t), kn(n);
  for (const char* key : {"traj_len", "channels", "heads", "embed_dim", "feature_dim", "grid_h", "grid_w", "frame_h", "frame_w",
                          "cross_attention", "use_cpe", "patch_level", "uncond_keeps_cpe", "T_diff", "beta_start", "beta_end"})
    if (kt.get(key) != kn.get(key))
      throw ConfigError(std::string("config key '") + key + "' = " + kn.get(key) + " conflicts with the trained model (" + kt.get(key) + ")");
}

int finish(const CommandSummary& s, const Common& c) {
  if (c.json) std::cout << s.to_json().dump(2) << '\n';
  for (const auto& f : s.failures) std::cerr << s.command << ": " << f.item << ": " << f.reason << '\n';
  if (!s.ok()) std::cerr << s.command << ": " << s.failures.size() << " item(s) failed, " << s.processed << " processed\n";
  return s.ok() ? 0 : 1;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value config file");
  app->add_option("--set", c.sets, "override a config key (key=value), repeatable");
  app->add_option_function<std::uint64_t>("--seed", [&c](std::uint64_t s) { c.seed = s, c.seed_given = true; }, "random seed");
  app->add_option("--workers", c.workers, "parallel workers for per-stimulus work")->check(CLI::PositiveNumber);
  app->add_flag("--json", c.json, "print a JSON summary to stdout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaze trajectory diffusion toolkit"};
  app.require_subcommand(1);
  Common c;
  std::string manifest, data, features, out, run, input, gt, gen, dataset = "dataset", split_part = "test";
  std::size_t n_samples = 0;
  SyntheticOptions syn;

  auto* pre = app.add_subcommand("preprocess", "recordings to fixed-length trajectories and a split");
  pre->add_option("--manifest", manifest, "dataset manifest CSV");
  pre->add_option("--out", out, "output data directory")->required();

  auto* train = app.add_subcommand("train", "train the denoiser");
  train->add_option("--data", data, "preprocessed data directory");
  train->add_option("--features", features, "feature grid directory")->required();
  train->add_option("--out", out, "run directory")->required();

  auto* sample = app.add_subcommand("sample", "generate trajectories per stimulus");
  sample->add_option("--run", run, "run directory")->required();
  sample->add_option("--data", data, "preprocessed data directory (for the split)");
  sample->add_option("--features", features, "feature grid directory")->required();
  sample->add_option("--out", out, "output directory")->required();
  sample->add_option("--n", n_samples, "trajectories per stimulus (samples_per_stimulus)");
  sample->add_option("--split", split_part, "test | train | all")->check(CLI::IsMember({"test", "train", "all"}));

  auto* extract = app.add_subcommand("extract", "fixation extraction to scanpath files");
  extract->add_option("--input", input, "trajectory file or directory")->required();
  extract->add_option("--out", out, "scanpath directory")->required();

  auto* sal = app.add_subcommand("saliency", "fixation density maps per stimulus");
  sal->add_option("--scanpaths", input, "scanpath directory")->required();
  sal->add_option("--out", out, "map directory")->required();

  auto* eval = app.add_subcommand("evaluate", "scanpath, trajectory and saliency metrics");
  eval->add_option("--gt", gt, "ground-truth trajectory file or directory");
  eval->add_option("--gen", gen, "generated trajectory file or directory")->required();
  eval->add_option("--data", data, "restrict ground truth to this data directory's test split");
  eval->add_option("--dataset", dataset, "dataset label for the report");
  eval->add_option("--out", out, "report CSV path")->required();

  auto* stats = app.add_subcommand("stats", "saccade amplitude / direction / inter-saccade angle histograms");
  stats->add_option("--input", input, "trajectory file/directory or scanpath directory")->required();
  stats->add_option("--out", out, "histogram directory")->required();

  auto* synth = app.add_subcommand("synth-data", "synthetic two-blob dataset with feature grids");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--stimuli", syn.stimuli, "number of stimuli");
  synth->add_option("--recordings", syn.recordings_per_stimulus, "recordings per stimulus");
  synth->add_option("--samples", syn.samples_per_recording, "samples per recording");

  for (auto* sub : {pre, train, sample, extract, sal, eval, stats, synth}) add_common(sub, c);
  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) {
      const auto cfg = build_config(c);
      const auto m = manifest.empty() ? resolve_input("") / "manifest.csv" : resolve_input(manifest);
      return finish(run_preprocess(m, out, cfg), c);
    }
    if (*train) {
      const auto cfg = build_config(c);
      return finish(run_train(resolve_input(data), resolve_input(features), out, cfg), c);
    }
    if (*sample) {
      const auto trained = load_config((fs::path(run) / kConfigFile).string());
      auto cfg = build_config(c, fs::path(run) / kConfigFile);
      if (n_samples) cfg.samples_per_stimulus = n_samples;
      require_same_model(trained, cfg);
      const auto sp = load_split(resolve_input(data) / kSplitFile);
      std::set<std::string> ids;
      if (split_part != "train") ids.insert(sp.test_stimuli.begin(), sp.test_stimuli.end());
      if (split_part != "test") ids.insert(sp.train_stimuli.begin(), sp.train_stimuli.end());
      return finish(run_sample(run, ids, resolve_input(features), out, cfg, c.workers), c);
    }
    if (*extract) return finish(run_extract(resolve_input(input), out, build_config(c)), c);
    if (*sal) return finish(run_saliency(resolve_input(input), out, build_config(c)), c);
    if (*eval) {
      const auto cfg = build_config(c);
      auto truth = load_trajectory_set(gt.empty() ? resolve_input(data) / kTrajectoryFile : resolve_input(gt));
      if (!data.empty()) {
        const auto sp = load_split(resolve_input(data) / kSplitFile);
        std::erase_if(truth, [&](const Trajectory& t) { return !sp.test_stimuli.count(t.stimulus_id); });
      }
      auto res = run_evaluate(truth, load_trajectory_set(resolve_input(gen)), dataset, cfg, c.workers);
      if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
      std::ofstream csv(out);
      if (!csv) throw std::runtime_error("cannot write " + out);
      res.report.write_csv(csv);
      std::ofstream(fs::path(out).replace_extension(".json")) << res.report.summary().dump(2) << '\n';
      return finish(res.summary, c);
    }
    if (*stats) return finish(run_stats(resolve_input(input), out, build_config(c)).summary, c);
    if (*synth) {
      if (c.seed_given) syn.seed = c.seed;
      std::map<std::string, std::string> extra;
      if (!c.config.empty()) {
        std::ifstream in(resolve_input(c.config));
        if (!in) throw ConfigError("cannot open config " + c.config);
        extra = parse_config_text(in, c.config);
      }
      for (const auto& [k, v] : overrides(c)) extra[k] = v;
      return finish(run_synth_data(out, syn, extra).summary, c);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
