#pragma once

// Noise-prediction network: a 1D U-Net over trajectory tokens with timestep
// conditioning, self-attention at every resolution and cross-attention from
// trajectory tokens to positionally-embedded feature tokens.

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gazediff/core/ops.hpp"
#include "gazediff/core/parameters.hpp"
#include "gazediff/model/cpe.hpp"

namespace gazediff {

enum class CrossAttention {
  everywhere,  // at the end of every U-Net block
  input_only,  // one layer before the U-Net
  none,
};

inline const char* to_string(CrossAttention c) {
  switch (c) {
    case CrossAttention::everywhere: return "everywhere";
    case CrossAttention::input_only: return "input_only";
    case CrossAttention::none: return "none";
  }
  return "?";
}

inline CrossAttention parse_cross_attention(const std::string& s) {
  if (s == "everywhere") return CrossAttention::everywhere;
  if (s == "input_only") return CrossAttention::input_only;
  if (s == "none") return CrossAttention::none;
  throw ConfigError("cross_attention must be everywhere|input_only|none, got '" + s + "'");
}

struct DenoiserConfig {
  std::size_t traj_len = 720;
  std::size_t depth = 3;
  std::vector<std::size_t> channels{64, 128, 256};
  std::size_t heads = 4;
  std::size_t embed_dim = 64;     // D: trajectory projection and CPE width
  std::size_t feature_dim = 64;   // D_feat of incoming grids
  std::size_t grid_h = 32;
  std::size_t grid_w = 32;
  FrameSize frame{224, 224};
  CrossAttention cross_attention = CrossAttention::everywhere;
  bool use_cpe = true;
  bool patch_level = true;        // false: one global token joins self-attention instead
  bool uncond_keeps_cpe = true;   // unconditional pass still adds P' to the zero grid

  std::size_t time_dim() const { return 4 * embed_dim; }

  void validate() const {
    if (depth == 0) throw ConfigError("depth must be >= 1");
    if (channels.size() != depth)
      throw ConfigError("channels lists " + std::to_string(channels.size()) + " levels for depth " + std::to_string(depth));
    if (traj_len == 0 || traj_len % (std::size_t{1} << depth) != 0)
      throw ConfigError("traj_len " + std::to_string(traj_len) + " not divisible by 2^depth");
    if (embed_dim == 0 || embed_dim % 4 != 0) throw ConfigError("embed_dim must be a positive multiple of 4");
    if (heads == 0) throw ConfigError("heads must be >= 1");
    for (auto c : channels)
      if (c == 0 || c % heads != 0) throw ConfigError("channel count " + std::to_string(c) + " not divisible by heads");
    if (embed_dim % heads != 0) throw ConfigError("embed_dim not divisible by heads");
    if (feature_dim == 0 || grid_h == 0 || grid_w == 0) throw ConfigError("feature grid dims must be >= 1");
    if (frame.height < 2 || frame.width < 2) throw ConfigError("frame must be at least 2x2");
  }
};

/// One forward batch. Rows of `features` flagged in `unconditional` are the zero grid.
template <class T>
struct DenoiserBatch {
  Tensor<T> noisy;                      // [B, L, 2] model-space coordinates
  std::vector<std::size_t> timesteps;   // B entries, 0-based index into the schedule
  Tensor<T> features;                   // [B, H'*W', D_feat]
  std::vector<bool> unconditional;      // B entries

  std::size_t batch() const { return timesteps.size(); }
};

template <class T>
class Denoiser {
 public:
  explicit Denoiser(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    cpe_ = std::make_shared<const CpeGrid<T>>(make_cpe_grid<T>(cfg_.frame.height, cfg_.frame.width, cfg_.embed_dim));
    cpe_features_ = cpe_for_features(*cpe_, cfg_.grid_h, cfg_.grid_w);
  }

  const DenoiserConfig& config() const { return cfg_; }
  const CpeGrid<T>& cpe_grid() const { return *cpe_; }
  const std::vector<T>& cpe_features() const { return cpe_features_; }

  /// Fresh parameters: weights ~ N(0, 1/fan_in), zero biases, unit layer-norm gains.
  ParameterStore<T> init_parameters(std::uint64_t seed) const {
    ParameterStore<T> p;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto weight = [&](const std::string& name, Shape shape, std::size_t fan_in) {
      Tensor<T> t(std::move(shape));
      const double s = 1.0 / std::sqrt(double(fan_in));
      for (auto& v : t.data) v = T(s * normal(rng));
      p.add(name, std::move(t));
    };
    auto bias = [&](const std::string& name, std::size_t n) { p.add(name, Tensor<T>({n})); };
    auto norm = [&](const std::string& name, std::size_t n) {
      p.add(name + ".gain", Tensor<T>({n}, T{1}));
      p.add(name + ".shift", Tensor<T>({n}));
    };
    auto lin = [&](const std::string& name, std::size_t in, std::size_t out) {
      weight(name + ".w", {in, out}, in);
      bias(name + ".b", out);
    };
    auto conv = [&](const std::string& name, std::size_t k, std::size_t in, std::size_t out) {
      weight(name + ".w", {k, in, out}, k * in);
      bias(name + ".b", out);
    };
    auto attention = [&](const std::string& name, std::size_t c, std::size_t ckv) {
      weight(name + ".q", {c, c}, c);
      weight(name + ".k", {ckv, c}, ckv);
      weight(name + ".v", {ckv, c}, ckv);
      lin(name + ".o", c, c);
    };
    auto resblock = [&](const std::string& name, std::size_t cin, std::size_t cout) {
      conv(name + ".conv1", 3, cin, cout);
      lin(name + ".time", cfg_.time_dim(), cout);
      norm(name + ".norm", cout);
      conv(name + ".conv2", 3, cout, cout);
      if (cin != cout) conv(name + ".skip", 1, cin, cout);
    };
    auto stage = [&](const std::string& name, std::size_t c) {
      norm(name + ".sa_norm", c);
      attention(name + ".sa", c, c);
      if (!cfg_.patch_level) lin(name + ".global", cfg_.embed_dim, c);
      if (cfg_.cross_attention == CrossAttention::everywhere && cfg_.patch_level) {
        norm(name + ".xa_norm", c);
        attention(name + ".xa", c, cfg_.embed_dim);
      }
    };

    const std::size_t d = cfg_.embed_dim;
    conv("in", 3, 2, d);
    lin("time.fc1", d, cfg_.time_dim());
    lin("time.fc2", cfg_.time_dim(), cfg_.time_dim());
    lin("feat", cfg_.feature_dim, d);
    if (cfg_.cross_attention == CrossAttention::input_only && cfg_.patch_level) {
      norm("in_xa_norm", d);
      attention("in_xa", d, d);
    }
    std::size_t prev = d;
    for (std::size_t j = 0; j < cfg_.depth; ++j) {
      const std::string n = "down" + std::to_string(j);
      resblock(n, prev, cfg_.channels[j]);
      stage(n, cfg_.channels[j]);
      conv(n + ".pool", 3, cfg_.channels[j], cfg_.channels[j]);
      prev = cfg_.channels[j];
    }
    resblock("mid", prev, prev);
    stage("mid", prev);
    for (std::size_t jj = cfg_.depth; jj-- > 0;) {
      const std::string n = "up" + std::to_string(jj);
      const std::size_t c = cfg_.channels[jj];
      conv(n + ".upconv", 3, prev, c);
      resblock(n, 2 * c, c);
      stage(n, c);
      prev = c;
    }
    norm("out.norm", prev);
    conv("out", 1, prev, 2);
    return p;
  }

  /// Predicted noise [B, L, 2].
  Var<T> forward(BoundParameters<T>& p, const DenoiserBatch<T>& batch) const {
    Tape<T>& tape = p.tape();
    const std::size_t bsz = batch.batch(), len = cfg_.traj_len, d = cfg_.embed_dim;
    const std::size_t cells = cfg_.grid_h * cfg_.grid_w;
    require_shape(batch.noisy.shape, {bsz, len, 2}, "denoiser input");
    require_shape(batch.features.shape, {bsz, cells, cfg_.feature_dim}, "denoiser features");
    if (batch.unconditional.size() != bsz) throw DimensionError("denoiser: unconditional mask length");

    Var<T> h = ops::conv1d(tape.constant(batch.noisy), p("in.w"), p("in.b"), 1, 1);
    if (cfg_.use_cpe) h = ops::add(h, tape.constant(trajectory_cpe(batch.noisy)));
    check(h, "input projection");

    Var<T> temb = time_embedding(p, batch.timesteps);

    Var<T> context;  // [B, H'*W', D] feature tokens
    Var<T> global;   // [B, 1, D] global token
    if (cfg_.patch_level) {
      if (cfg_.cross_attention != CrossAttention::none) {
        context = ops::linear(tape.constant(batch.features), p("feat.w"), p("feat.b"));
        if (cfg_.use_cpe) context = ops::add(context, tape.constant(feature_cpe(batch)));
        check(context, "feature projection");
      }
    } else {
      Tensor<T> pooled({bsz, 1, cfg_.feature_dim});
      for (std::size_t b = 0; b < bsz; ++b)
        for (std::size_t n = 0; n < cells; ++n)
          for (std::size_t c = 0; c < cfg_.feature_dim; ++c)
            pooled[b * cfg_.feature_dim + c] += batch.features[(b * cells + n) * cfg_.feature_dim + c] / T(cells);
      global = ops::linear(tape.constant(pooled), p("feat.w"), p("feat.b"));
    }

    if (cfg_.cross_attention == CrossAttention::input_only && context.valid()) {
      h = ops::add(h, attention(p, "in_xa", layer_norm(p, "in_xa_norm", h), context, d));
      check(h, "input cross-attention");
    }

    std::vector<Var<T>> skips;
    std::size_t prev = d;
    for (std::size_t j = 0; j < cfg_.depth; ++j) {
      const std::string n = "down" + std::to_string(j);
      h = resblock(p, n, h, temb, prev != cfg_.channels[j]);
      h = stage(p, n, h, context, global);
      skips.push_back(h);
      h = ops::conv1d(h, p(n + ".pool.w"), p(n + ".pool.b"), 2, 1);
      check(h, n);
      prev = cfg_.channels[j];
    }
    h = resblock(p, "mid", h, temb, false);
    h = stage(p, "mid", h, context, global);
    check(h, "mid");
    for (std::size_t jj = cfg_.depth; jj-- > 0;) {
      const std::string n = "up" + std::to_string(jj);
      h = ops::conv1d(ops::upsample_nearest(h, 2), p(n + ".upconv.w"), p(n + ".upconv.b"), 1, 1);
      h = ops::concat_channels(h, skips[jj]);
      h = resblock(p, n, h, temb, true);
      h = stage(p, n, h, context, global);
      check(h, n);
    }
    h = ops::silu(layer_norm(p, "out.norm", h));
    Var<T> out = ops::conv1d(h, p("out.w"), p("out.b"));
    check(out, "output");
    return out;
  }

  /// p_i for every token of every batch row, [B, L, D].
  Tensor<T> trajectory_cpe(const Tensor<T>& noisy) const {
    const std::size_t bsz = noisy.dim(0), len = noisy.dim(1);
    Tensor<T> out({bsz, len, cfg_.embed_dim});
    std::vector<Point> pts(len);
    for (std::size_t b = 0; b < bsz; ++b) {
      for (std::size_t i = 0; i < len; ++i)
        pts[i] = {double(noisy[(b * len + i) * 2]), double(noisy[(b * len + i) * 2 + 1])};
      cpe_lookup(pts.data(), len, *cpe_, out.data.data() + b * len * cfg_.embed_dim);
    }
    return out;
  }

 private:
  static void check(const Var<T>& v, const std::string& layer) {
    if (!v.value().all_finite()) throw NumericError("denoiser: non-finite activation after " + layer);
  }

  Tensor<T> feature_cpe(const DenoiserBatch<T>& batch) const {
    const std::size_t bsz = batch.batch(), n = cpe_features_.size();
    Tensor<T> out({bsz, cfg_.grid_h * cfg_.grid_w, cfg_.embed_dim});
    for (std::size_t b = 0; b < bsz; ++b)
      if (!batch.unconditional[b] || cfg_.uncond_keeps_cpe)
        std::copy(cpe_features_.begin(), cpe_features_.end(), out.data.begin() + std::ptrdiff_t(b * n));
    return out;
  }

  Var<T> time_embedding(BoundParameters<T>& p, const std::vector<std::size_t>& timesteps) const {
    const std::size_t d = cfg_.embed_dim;
    Tensor<T> codes({timesteps.size(), d});
    for (std::size_t b = 0; b < timesteps.size(); ++b) sinusoid(double(timesteps[b]), d, codes.data.data() + b * d);
    Var<T> e = ops::linear(p.tape().constant(codes), p("time.fc1.w"), p("time.fc1.b"));
    return ops::linear(ops::silu(e), p("time.fc2.w"), p("time.fc2.b"));
  }

  Var<T> layer_norm(BoundParameters<T>& p, const std::string& name, Var<T> x) const {
    return ops::layer_norm(x, p(name + ".gain"), p(name + ".shift"));
  }

  Var<T> resblock(BoundParameters<T>& p, const std::string& name, Var<T> x, Var<T> temb, bool project_skip) const {
    Var<T> h = ops::conv1d(x, p(name + ".conv1.w"), p(name + ".conv1.b"), 1, 1);
    h = ops::add_rows(h, ops::linear(temb, p(name + ".time.w"), p(name + ".time.b")));
    h = ops::silu(layer_norm(p, name + ".norm", h));
    h = ops::conv1d(h, p(name + ".conv2.w"), p(name + ".conv2.b"), 1, 1);
    Var<T> skip = project_skip ? ops::conv1d(x, p(name + ".skip.w"), p(name + ".skip.b")) : x;
    return ops::add(h, skip);
  }

  Var<T> stage(BoundParameters<T>& p, const std::string& name, Var<T> h, Var<T> context, Var<T> global) const {
    const std::size_t c = h.shape()[2];
    Var<T> normed = layer_norm(p, name + ".sa_norm", h);
    Var<T> keys = normed;
    if (global.valid()) keys = ops::concat_sequence(normed, ops::linear(global, p(name + ".global.w"), p(name + ".global.b")));
    h = ops::add(h, attention(p, name + ".sa", normed, keys, c));
    if (cfg_.cross_attention == CrossAttention::everywhere && context.valid())
      h = ops::add(h, attention(p, name + ".xa", layer_norm(p, name + ".xa_norm", h), context, c));
    return h;
  }

  Var<T> attention(BoundParameters<T>& p, const std::string& name, Var<T> queries, Var<T> keys, std::size_t c) const {
    const std::size_t heads = cfg_.heads;
    Var<T> q = ops::split_heads(ops::linear(queries, p(name + ".q")), heads);
    Var<T> k = ops::split_heads(ops::linear(keys, p(name + ".k")), heads);
    Var<T> v = ops::split_heads(ops::linear(keys, p(name + ".v")), heads);
    Var<T> scores = ops::scale(ops::bmm(q, k, true), T(1.0 / std::sqrt(double(c / heads))));
    Var<T> mixed = ops::merge_heads(ops::bmm(ops::softmax(scores), v), heads);
    return ops::linear(mixed, p(name + ".o.w"), p(name + ".o.b"));
  }

  DenoiserConfig cfg_;
  std::shared_ptr<const CpeGrid<T>> cpe_;
  std::vector<T> cpe_features_;
};

/// Grid values as one batch row [H'*W', D_feat], resampled to the model grid if needed.
template <class T>
std::vector<T> feature_tokens(const FeatureGrid& grid, const DenoiserConfig& cfg) {
  if (grid.depth != cfg.feature_dim)
    throw DimensionError("feature grid " + grid.stimulus_id + " has depth " + std::to_string(grid.depth) + ", model expects " +
                         std::to_string(cfg.feature_dim));
  const FeatureGrid& g = (grid.height == cfg.grid_h && grid.width == cfg.grid_w) ? grid : resample_grid(grid, cfg.grid_h, cfg.grid_w);
  return std::vector<T>(g.values.begin(), g.values.end());
}

}  // namespace gazediff
