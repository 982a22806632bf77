#include <gtest/gtest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gazediff/app/config.hpp"
#include "gazediff/app/parallel.hpp"
#include "gazediff/app/pipeline.hpp"

#ifndef GAZEDIFF_CLI
#error "GAZEDIFF_CLI must name the command-line binary"
#endif

namespace fs = std::filesystem;
using namespace gazediff;

namespace {

std::map<std::string, std::string> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config_text(in);
}

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(GAZEDIFF_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gazediff_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Config, DefaultsValidate) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.model.traj_len, 720u);
  EXPECT_EQ(c.T_diff, 1000u);
  EXPECT_DOUBLE_EQ(c.cfg_scale, 4.0);
  EXPECT_EQ(c.samples_per_stimulus, 15u);
}

TEST(Config, ParsesCommentsAndWhitespace) {
  RunConfig c;
  apply_config(c, parse("# header\n  lr = 0.003  # inline\n\nchannels = 16,32\nsampler=ddpm\nuse_cpe = false\n"));
  EXPECT_DOUBLE_EQ(c.lr, 0.003);
  EXPECT_EQ(c.model.channels, (std::vector<std::size_t>{16, 32}));
  EXPECT_EQ(c.model.depth, 2u);
  EXPECT_EQ(c.sampler, "ddpm");
  EXPECT_FALSE(c.model.use_cpe);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  RunConfig c;
  EXPECT_THROW(apply_config(c, parse("learning_rate = 1\n")), ConfigError);
  EXPECT_THROW(apply_config(c, parse("batch = -3\n")), ConfigError);
  EXPECT_THROW(apply_config(c, parse("batch = 3x\n")), ConfigError);
  EXPECT_THROW(apply_config(c, parse("use_cpe = maybe\n")), ConfigError);
  EXPECT_THROW(parse("just words\n"), ConfigError);
}

TEST(Config, ConflictsAreErrors) {
  EXPECT_THROW(parse("lr = 1\nlr = 2\n"), ConfigError);
  EXPECT_NO_THROW(parse("lr = 1\nlr = 1\n"));
  RunConfig c;
  EXPECT_THROW(apply_config(c, parse("channels = 8,16\ndepth = 3\n")), ConfigError);
  RunConfig ok;
  EXPECT_NO_THROW(apply_config(ok, parse("channels = 8,16\ndepth = 2\n")));
}

TEST(Config, ValidationCatchesInconsistentModels) {
  RunConfig c;
  c.ddim_steps = 2000;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.model.traj_len = 100;  // not divisible by 2^3
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, DumpLoadRoundTrip) {
  RunConfig c;
  apply_config(c, parse("lr = 0.1\nkl_epsilon = 1e-9\ncross_attention = input_only\nchannels = 8,8\ntraj_len = 64\n"));
  const auto text = dump_config(c);
  RunConfig back;
  apply_config(back, parse(text));
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(back.model.cross_attention, CrossAttention::input_only);
  EXPECT_DOUBLE_EQ(back.kl_epsilon, 1e-9);
  EXPECT_NE(text.find("lr = 0.1\n"), std::string::npos);
}

TEST(Parallel, CollectsErrorsInItemOrder) {
  std::atomic<int> ran{0};
  const auto errors = parallel_for(20, 4, [&](std::size_t i) {
    ++ran;
    if (i % 7 == 3) throw std::runtime_error("bad " + std::to_string(i));
  });
  EXPECT_EQ(ran.load(), 20);
  ASSERT_EQ(errors.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(errors[i], i % 7 == 3 ? "bad " + std::to_string(i) : "");
  EXPECT_TRUE(parallel_for(0, 3, [](std::size_t) {}).empty());
}

TEST(Parallel, ItemSeedsAreStableAndDistinct) {
  EXPECT_EQ(item_seed(0, "img1"), item_seed(0, "img1"));
  EXPECT_NE(item_seed(0, "img1"), item_seed(0, "img2"));
  EXPECT_NE(item_seed(0, "img1"), item_seed(1, "img1"));
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(item_seed(5, "s" + std::to_string(i)));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(Cli, RejectsBadInvocations) {
  EXPECT_NE(cli("no-such-command").code, 0);
  const auto dir = scratch("bad");
  EXPECT_EQ(cli("synth-data --out " + (dir / "syn").string() + " --stimuli 2 --set nonsense=1").code, 2);
  ASSERT_EQ(cli("synth-data --out " + (dir / "syn").string() + " --stimuli 2 --set cross_attention=none").code, 0);
  EXPECT_EQ(load_config((dir / "syn/config.txt").string()).model.cross_attention, CrossAttention::none);
  EXPECT_EQ(cli("preprocess --manifest " + (dir / "syn/manifest.csv").string() + " --out " + (dir / "d").string() + " --set nonsense=1").code, 2);
  EXPECT_EQ(cli("preprocess --manifest " + (dir / "missing.csv").string() + " --out " + (dir / "d").string()).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, EndToEndOnSyntheticData) {
  const auto dir = scratch("e2e");
  const std::string syn = (dir / "syn").string(), data = (dir / "data").string(), run = (dir / "run").string();
  const std::string cfg = " --config " + syn + "/config.txt";

  auto r = cli("synth-data --out " + syn + " --stimuli 6 --recordings 3 --json");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["processed"], 18);

  ASSERT_EQ(cli("preprocess --manifest " + syn + "/manifest.csv --out " + data + cfg).code, 0);
  const auto split = load_split(fs::path(data) / kSplitFile);
  EXPECT_EQ(split.test_stimuli.size() + split.train_stimuli.size(), 6u);

  ASSERT_EQ(cli("train --data " + data + " --features " + syn + "/features --out " + run + cfg + " --set max_steps=6 --set batch=4").code, 0);
  EXPECT_TRUE(fs::exists(fs::path(run) / kModelFile));
  EXPECT_EQ(read_csv(fs::path(run) / kLossFile).size(), 7u);  // header + one row per step

  // sampling may not redefine the trained architecture
  EXPECT_EQ(cli("sample --run " + run + " --data " + data + " --features " + syn + "/features --out " + (dir / "x").string() +
                " --set embed_dim=64").code,
            2);
  const std::string gen = (dir / "gen").string();
  r = cli("sample --run " + run + " --data " + data + " --features " + syn + "/features --out " + gen +
          " --n 2 --set ddim_steps=4 --workers 2 --json");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::distance(fs::directory_iterator(gen), fs::directory_iterator{}), std::ptrdiff_t(2 * split.test_stimuli.size()));
  const std::string again = (dir / "gen2").string();
  ASSERT_EQ(cli("sample --run " + run + " --data " + data + " --features " + syn + "/features --out " + again +
                " --n 2 --set ddim_steps=4 --workers 1").code,
            0);
  for (const auto& e : fs::directory_iterator(gen)) {
    std::ifstream a(e.path(), std::ios::binary), b(fs::path(again) / e.path().filename(), std::ios::binary);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}))
        << "worker count changed " << e.path().filename();
  }

  const std::string traj = data + "/" + kTrajectoryFile;
  ASSERT_EQ(cli("extract --input " + traj + " --out " + (dir / "sp").string() + cfg).code, 0);
  ASSERT_EQ(cli("saliency --scanpaths " + (dir / "sp").string() + " --out " + (dir / "maps").string() + cfg).code, 0);
  EXPECT_TRUE(fs::exists(dir / "maps" / "syn0000.pfm"));
  const auto map = read_pfm((dir / "maps" / "syn0000.pfm").string());
  EXPECT_EQ(map.width, 224u);
  double total = 0;
  for (double v : map.values) total += v;
  EXPECT_NEAR(total, 1.0, 1e-4);

  ASSERT_EQ(cli("evaluate --gt " + traj + " --gen " + traj + " --dataset synth --out " + (dir / "self.csv").string() + cfg).code, 0);
  const auto rows = read_csv(dir / "self.csv");
  ASSERT_GT(rows.size(), 1u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"dataset", "image", "metric", "mean", "best"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 5u);
    if (rows[i][2].rfind("saliency_", 0) == 0) continue;
    EXPECT_EQ(std::stod(rows[i][4]), 0.0) << rows[i][1] << " " << rows[i][2];
    EXPECT_LE(std::stod(rows[i][4]), std::stod(rows[i][3]));
  }
  EXPECT_TRUE(fs::exists(dir / "self.json"));

  ASSERT_EQ(cli("evaluate --data " + data + " --gen " + gen + " --out " + (dir / "gen.csv").string() + cfg).code, 0);
  ASSERT_EQ(cli("stats --input " + traj + " --out " + (dir / "stats").string() + cfg).code, 0);
  for (const char* f : {"amplitude.csv", "direction.csv", "inter_saccade_angle.csv"}) EXPECT_TRUE(fs::exists(dir / "stats" / f)) << f;
  EXPECT_EQ(read_csv(dir / "stats" / "direction.csv").size(), 37u);

  // a stimulus without a feature grid fails alone and the command reports it
  fs::remove(fs::path(syn) / "features" / "syn0000.gzfg");
  r = cli("sample --run " + run + " --data " + data + " --features " + syn + "/features --out " + (dir / "gen3").string() +
          " --n 1 --set ddim_steps=2 --split all --json");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(r.out)["failed"], 1);
  fs::remove_all(dir);
}
