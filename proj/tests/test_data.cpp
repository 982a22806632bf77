#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "gazediff/app/config.hpp"
#include "gazediff/data/gaze_data.hpp"
#include "gazediff/data/synthetic.hpp"
#include "gazediff/features/feature_grid.hpp"

using namespace gazediff;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("gazediff_test_data_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

RawRecording ramp_recording(std::size_t n, double rate = 240.0) {
  RawRecording rec{"sub", "img", {}, rate};
  for (std::size_t i = 0; i < n; ++i) rec.samples.push_back({double(i) / rate, double(i % 200), double((3 * i) % 150), true});
  return rec;
}

FeatureGrid random_grid(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t d, std::string id) {
  std::normal_distribution<double> n(0, 2);
  FeatureGrid g(h, w, d, std::move(id));
  for (auto& v : g.values) v = float(n(rng));
  return g;
}

}  // namespace

// ---------------------------------------------------------------- feature grids

TEST(FeatureGrid, SaveLoadIsByteIdentical) {
  std::mt19937_64 rng(1);
  const auto dir = temp_dir("grid");
  const auto g = random_grid(rng, 5, 7, 3, "img_001");
  save_grid((dir / "a.gzfg").string(), g);
  const auto back = load_grid((dir / "a.gzfg").string());
  EXPECT_EQ(back.values, g.values);
  EXPECT_EQ(back.stimulus_id, "img_001");
  save_grid((dir / "b.gzfg").string(), back);
  EXPECT_EQ(io::read_file((dir / "a.gzfg").string()), io::read_file((dir / "b.gzfg").string()));
}

TEST(FeatureGrid, PayloadSizeArithmetic) {
  const FeatureGrid g(32, 32, 64, "x");
  const std::size_t header = 4 + 4 + 3 * 4 + 1 + 2 + 1;
  EXPECT_EQ(encode_grid(g).size(), header + 32u * 32 * 64 * 4);
}

TEST(FeatureGrid, RejectsNaNAndCorruptFiles) {
  FeatureGrid g(2, 2, 2, "x");
  g.values[5] = std::nanf("");
  EXPECT_THROW(decode_grid(encode_grid(g)), DataError);
  g.values[5] = 0;
  auto bytes = encode_grid(g);
  bytes[0] = 'X';
  EXPECT_THROW(decode_grid(bytes), FormatError);
  bytes = encode_grid(g);
  bytes.pop_back();
  EXPECT_THROW(decode_grid(bytes), FormatError);
  bytes = encode_grid(g);
  bytes.push_back(0);
  EXPECT_THROW(decode_grid(bytes), FormatError);
}

TEST(FeatureGrid, ResampleIdentityConstantAndCenter) {
  std::mt19937_64 rng(2);
  const auto g = random_grid(rng, 4, 5, 2, "a");
  EXPECT_EQ(resample_grid(g, 4, 5).values, g.values);
  FeatureGrid c(3, 3, 2, "c");
  for (auto& v : c.values) v = 0.75f;
  for (auto v : resample_grid(c, 7, 5).values) EXPECT_FLOAT_EQ(v, 0.75f);
  FeatureGrid s(2, 2, 1, "s");
  s.values = {0, 1, 2, 3};
  const auto r = resample_grid(s, 3, 3);
  EXPECT_FLOAT_EQ(r.at(1, 1, 0), 1.5f);
}

TEST(FeatureGrid, ResampleReproducesAffineRamps) {
  FeatureGrid g(4, 6, 1, "ramp");
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 6; ++x) g.at(y, x, 0) = float(2.0 * double(x) / 5.0 - 3.0 * double(y) / 3.0 + 0.5);
  const auto r = resample_grid(g, 9, 11);
  for (std::size_t y = 0; y < 9; ++y)
    for (std::size_t x = 0; x < 11; ++x) EXPECT_NEAR(r.at(y, x, 0), 2.0 * double(x) / 10.0 - 3.0 * double(y) / 8.0 + 0.5, 1e-5);
}

TEST(FeatureGrid, StandardizeGivesZeroMeanUnitVariance) {
  std::mt19937_64 rng(3);
  const auto g = standardize(random_grid(rng, 6, 6, 4, "z"));
  double mean = 0, var = 0;
  for (float v : g.values) mean += v;
  mean /= double(g.values.size());
  for (float v : g.values) var += (v - mean) * (v - mean);
  var /= double(g.values.size());
  EXPECT_NEAR(mean, 0.0, 1e-6);
  EXPECT_NEAR(var, 1.0, 1e-5);
}

TEST(SynthGrid, SingleBlobPeaksAtCenterCell) {
  const auto g = synth_grid({{0.5, 0.5, 0.15, 2}}, 9, 9, 4);
  std::size_t best = 0;
  for (std::size_t i = 0; i < g.cells(); ++i)
    if (g.values[i * 4 + 2] > g.values[best * 4 + 2]) best = i;
  EXPECT_EQ(best, 4u * 9 + 4);
}

TEST(SynthGrid, ZeroBlobsIsAllZero) {
  for (float v : synth_grid({}, 4, 4, 3).values) EXPECT_EQ(v, 0.f);
}

TEST(SynthGrid, OrthogonalSignaturesDoNotLeak) {
  const auto g = synth_grid({{0.0, 0.0, 0.1, 0}, {1.0, 1.0, 0.1, 1}}, 8, 8, 3);
  EXPECT_LT(std::abs(g.at(0, 0, 1)), 1e-6);
  EXPECT_LT(std::abs(g.at(7, 7, 0)), 1e-6);
  EXPECT_FLOAT_EQ(g.at(0, 0, 0), 1.0f + float(std::exp(-0.5 * 2.0 / 0.01)));
  EXPECT_THROW(synth_grid({{0.5, 0.5, 0.1, 3}}, 4, 4, 3), std::length_error);
}

// ---------------------------------------------------------------- recordings

TEST(Recording, ParseAndRate) {
  std::istringstream in("t,x,y,valid\n0,1,2,1\n0.004,3,4,0\n0.008,nan,5,1\n");
  const auto rec = parse_recording(in, "s", "i");
  ASSERT_EQ(rec.samples.size(), 3u);
  EXPECT_FALSE(rec.samples[1].valid);
  EXPECT_TRUE(std::isnan(rec.samples[2].x));
  EXPECT_NEAR(rec.rate_hz, 250.0, 1e-9);
}

TEST(Recording, MalformedInputs) {
  std::istringstream bad_header("time,x,y,valid\n");
  EXPECT_THROW(parse_recording(bad_header, "s", "i"), FormatError);
  std::istringstream non_monotone("t,x,y,valid\n0.1,1,1,1\n0.1,2,2,1\n");
  EXPECT_THROW(parse_recording(non_monotone, "s", "i"), DataError);
  std::istringstream junk("t,x,y,valid\n0,abc,1,1\n");
  EXPECT_THROW(parse_recording(junk, "s", "i"), FormatError);
}

TEST(Recording, WriteParseRoundTrip) {
  const auto rec = ramp_recording(50);
  std::stringstream ss;
  write_recording(ss, rec);
  const auto back = parse_recording(ss, "sub", "img");
  ASSERT_EQ(back.samples.size(), 50u);
  EXPECT_DOUBLE_EQ(back.samples[49].x, rec.samples[49].x);
}

// ---------------------------------------------------------------- preprocess

TEST(Preprocess, RejectsTooShort) {
  const auto r = preprocess(ramp_recording(719), {224, 224});
  EXPECT_FALSE(r.trajectory);
  EXPECT_FALSE(r.rejection.empty());
}

TEST(Preprocess, ExactLengthIsAffineOnly) {
  const auto rec = ramp_recording(720);
  const auto r = preprocess(rec, {224, 224});
  ASSERT_TRUE(r.trajectory);
  ASSERT_EQ(r.trajectory->coords.size(), 720u);
  for (std::size_t i = 0; i < 720; ++i) {
    EXPECT_NEAR(r.trajectory->coords[i].x, 2.0 * rec.samples[i].x / 223.0 - 1.0, 1e-12);
    EXPECT_NEAR(r.trajectory->coords[i].y, 2.0 * rec.samples[i].y / 223.0 - 1.0, 1e-12);
  }
}

TEST(Preprocess, DecimatesIntegerMultiples) {
  const auto rec = ramp_recording(1440, 480.0);
  const auto r = preprocess(rec, {224, 224});
  ASSERT_TRUE(r.trajectory);
  for (std::size_t i = 0; i < 720; ++i) EXPECT_EQ(r.trajectory->coords[i], normalize({rec.samples[2 * i].x, rec.samples[2 * i].y}, {224, 224}));
}

TEST(Preprocess, TruncatesNearTargetAndInterpolatesOtherwise) {
  const auto near = preprocess(ramp_recording(740), {224, 224});
  ASSERT_TRUE(near.trajectory);
  EXPECT_EQ(near.trajectory->coords.back(), normalize({719 % 200, (3 * 719) % 150}, {224, 224}));
  RawRecording lin{"s", "i", {}, 240};
  for (std::size_t i = 0; i < 1000; ++i) lin.samples.push_back({double(i) / 240.0, 0.1 * double(i), 50.0, true});
  const auto r = preprocess(lin, {224, 224});
  ASSERT_TRUE(r.trajectory);
  EXPECT_EQ(r.trajectory->coords.size(), 720u);
  const auto px = denormalize(r.trajectory->coords, {224, 224});
  for (std::size_t i = 0; i < 720; ++i) EXPECT_NEAR(px[i].x, 0.1 * 999.0 * double(i) / 719.0, 1e-9);
}

TEST(Preprocess, TruncationCanKeepTheTail) {
  RunConfig c;
  c.truncate_keep_head = false;
  const auto r = preprocess(ramp_recording(740), {224, 224}, c.preprocess());
  ASSERT_TRUE(r.trajectory);
  EXPECT_EQ(r.trajectory->coords.front(), normalize({20 % 200, (3 * 20) % 150}, {224, 224}));
  EXPECT_EQ(r.trajectory->coords.back(), normalize({739 % 200, (3 * 739) % 150}, {224, 224}));
}

TEST(Preprocess, DropsInvalidAndOutOfBounds) {
  auto rec = ramp_recording(730);
  rec.samples[3].valid = false;
  rec.samples[5].x = -100;  // beyond the 5% margin
  rec.samples[7].y = std::nan("");
  const auto r = preprocess(rec, {224, 224});
  ASSERT_TRUE(r.trajectory);
  EXPECT_EQ(r.trajectory->coords[3], normalize({4, 12}, {224, 224}));
  auto too_many = ramp_recording(722);
  too_many.samples[0].valid = too_many.samples[1].valid = too_many.samples[2].valid = false;
  EXPECT_FALSE(preprocess(too_many, {224, 224}).trajectory);
  EXPECT_THROW(preprocess(RawRecording{}, {224, 224}), EmptyRecordingError);
}

TEST(Preprocess, OutputInUnitSquareAndIdempotent) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 228);
  RawRecording rec{"s", "i", {}, 240};
  for (std::size_t i = 0; i < 900; ++i) rec.samples.push_back({double(i) / 240.0, u(rng), u(rng), true});
  const auto r = preprocess(rec, {224, 224});
  ASSERT_TRUE(r.trajectory);
  for (const auto& p : r.trajectory->coords) {
    EXPECT_TRUE(std::isfinite(p.x) && std::isfinite(p.y));
    EXPECT_GE(p.x, -1.0);
    EXPECT_LE(p.x, 1.0);
  }
  // re-running on the already clean 720-sample output changes nothing
  RawRecording clean{"s", "i", {}, 240};
  const auto px = denormalize(r.trajectory->coords, {224, 224});
  for (std::size_t i = 0; i < px.size(); ++i) clean.samples.push_back({double(i) / 240.0, px[i].x, px[i].y, true});
  const auto again = preprocess(clean, {224, 224});
  for (std::size_t i = 0; i < 720; ++i) {
    EXPECT_NEAR(again.trajectory->coords[i].x, r.trajectory->coords[i].x, 1e-12);
    EXPECT_NEAR(again.trajectory->coords[i].y, r.trajectory->coords[i].y, 1e-12);
  }
}

TEST(Normalize, Corners) {
  const FrameSize f{100, 200};
  EXPECT_EQ(denormalize(Point{-1, -1}, f), (Point{0, 0}));
  EXPECT_EQ(denormalize(Point{1, 1}, f), (Point{199, 99}));
  EXPECT_EQ(denormalize(Point{0, 0}, f), (Point{99.5, 49.5}));
  EXPECT_EQ(normalize(denormalize(Point{0.25, -0.5}, f), f), (Point{0.25, -0.5}));
}

// ---------------------------------------------------------------- split

TEST(Split, CountsAndDeterminism) {
  std::vector<std::string> ids;
  for (int i = 0; i < 1003; ++i) ids.push_back("img" + std::to_string(i));
  const auto s = split(ids, 42, 0.1);
  EXPECT_EQ(s.test_stimuli.size(), 100u);
  EXPECT_EQ(s.train_stimuli.size(), 903u);
  for (const auto& t : s.test_stimuli) EXPECT_EQ(s.train_stimuli.count(t), 0u);
  EXPECT_EQ(split(ids, 42, 0.1).test_stimuli, s.test_stimuli);
  EXPECT_NE(split(ids, 43, 0.1).test_stimuli, s.test_stimuli);
  std::vector<std::string> ten(ids.begin(), ids.begin() + 10);
  EXPECT_EQ(split(ten, 0, 0.1).test_stimuli.size(), 1u);
}

TEST(Split, TextRoundTripAndOverlapRejected) {
  const auto s = split({"a", "b", "c", "d", "a"}, 3, 0.5);
  std::stringstream ss;
  write_split(ss, s);
  const auto back = read_split(ss);
  EXPECT_EQ(back.train_stimuli, s.train_stimuli);
  EXPECT_EQ(back.test_stimuli, s.test_stimuli);
  EXPECT_EQ(back.seed, 3u);
  std::istringstream overlap("seed 1\ntrain a\ntest a\n");
  EXPECT_THROW(read_split(overlap), DataError);
}

TEST(TrajectoryStore, RoundTripAndCorruption) {
  std::vector<Trajectory> t{{"img1", "s1", {{0.5, -0.25}, {1, 1}}}, {"img2", "s9", {{0, 0}}}};
  const auto bytes = encode_trajectories(t);
  const auto back = decode_trajectories(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].coords, t[0].coords);
  EXPECT_EQ(back[1].subject_id, "s9");
  EXPECT_EQ(encode_trajectories(back), bytes);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_THROW(decode_trajectories(cut), FormatError);
}

TEST(Manifest, RelativePathsResolveAgainstManifestDir) {
  const auto dir = temp_dir("manifest");
  {
    std::ofstream m(dir / "manifest.csv");
    write_manifest_header(m);
    m << "img1,images/img1.jpg,320,240,s1,rec/img1_s1.csv\n";
  }
  const auto e = read_manifest((dir / "manifest.csv").string());
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].size.width, 320u);
  EXPECT_EQ(e[0].size.height, 240u);
  EXPECT_EQ(fs::path(e[0].recording_path), dir / "rec/img1_s1.csv");
}

// ---------------------------------------------------------------- synthetic corpus

TEST(Synthetic, RecordingsDwellOnSalientBlob) {
  SyntheticOptions o;
  o.stimuli = 6;
  const auto data = make_two_blob_dataset(o);
  ASSERT_EQ(data.size(), 6u);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    EXPECT_EQ(s.id, synthetic_stimulus_id(i));
    EXPECT_EQ(s.salient_px.x < 112.0, i % 2 == 0);
    std::size_t near = 0, total = 0;
    for (const auto& rec : s.recordings)
      for (const auto& smp : rec.samples) near += distance({smp.x, smp.y}, s.salient_px) <= 2 * s.sigma_px, ++total;
    EXPECT_GT(double(near) / double(total), 0.95);
  }
  EXPECT_EQ(make_two_blob_dataset(o)[3].recordings[2].samples[10].x, data[3].recordings[2].samples[10].x);
}

TEST(Synthetic, SwappedGridExchangesSignatureChannels) {
  SyntheticOptions o;
  o.stimuli = 2;
  const auto data = make_two_blob_dataset(o);
  for (const auto& s : data) {
    const auto& g = s.grid;
    const auto& w = s.swapped_grid;
    for (std::size_t y = 0; y < g.height; ++y)
      for (std::size_t x = 0; x < g.width; ++x) {
        EXPECT_NEAR(w.at(y, x, 0) - g.at(y, x, 0), g.at(y, x, 1) - w.at(y, x, 1), 1e-5);
        for (std::size_t c = 2; c < g.depth; ++c) EXPECT_EQ(w.at(y, x, c), g.at(y, x, c));
      }
  }
  EXPECT_NEAR(o.rate_hz(), 64.0 / 3.0, 1e-12);
  EXPECT_NEAR(data[0].recordings[0].samples.back().t, 63.0 / o.rate_hz(), 1e-12);
}
