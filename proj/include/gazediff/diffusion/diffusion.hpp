#pragma once

// Denoising objective, training step, and the DDIM / ancestral samplers with
// classifier-free guidance.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "gazediff/core/adam.hpp"
#include "gazediff/diffusion/schedule.hpp"
#include "gazediff/model/denoiser.hpp"

namespace gazediff {

/// One training or sampling item. `tokens` is [H'*W' * D_feat] (see feature_tokens());
/// nullptr means the unconditional zero grid.
template <class T>
struct Conditioned {
  const PointSequence* coords = nullptr;
  const std::vector<T>* tokens = nullptr;
};

/// Per-step random draws of the objective, kept explicit so a loss can be replayed.
template <class T>
struct NoiseDraw {
  std::vector<std::size_t> timesteps;  // 1..T
  Tensor<T> eps;                       // [B, L, 2]
  std::vector<bool> drop_condition;
};

template <class T>
NoiseDraw<T> draw_noise(std::mt19937_64& rng, std::size_t batch, std::size_t len, std::size_t steps, double drop_prob) {
  NoiseDraw<T> d;
  std::uniform_int_distribution<std::size_t> pick_t(1, steps);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution drop(drop_prob);
  for (std::size_t b = 0; b < batch; ++b) d.timesteps.push_back(pick_t(rng));
  d.eps = Tensor<T>({batch, len, 2});
  for (auto& v : d.eps.data) v = T(normal(rng));
  for (std::size_t b = 0; b < batch; ++b) d.drop_condition.push_back(drop(rng));
  return d;
}

namespace detail {

template <class T>
Tensor<T> stack_features(const DenoiserConfig& cfg, std::span<const std::vector<T>* const> tokens) {
  const std::size_t cells = cfg.grid_h * cfg.grid_w, row = cells * cfg.feature_dim;
  Tensor<T> out({tokens.size(), cells, cfg.feature_dim});
  for (std::size_t b = 0; b < tokens.size(); ++b) {
    if (!tokens[b]) continue;
    if (tokens[b]->size() != row)
      throw DimensionError("feature tokens: " + std::to_string(tokens[b]->size()) + " values, model expects " + std::to_string(row));
    std::copy(tokens[b]->begin(), tokens[b]->end(), out.data.begin() + std::ptrdiff_t(b * row));
  }
  return out;
}

}  // namespace detail

/// Mean squared error between the drawn noise and the model's prediction at the noised input.
template <class T>
Var<T> denoising_loss(const Denoiser<T>& model, BoundParameters<T>& params, const DiffusionSchedule& schedule,
                      std::span<const Conditioned<T>> items, const NoiseDraw<T>& draw) {
  const auto& cfg = model.config();
  const std::size_t bsz = items.size(), len = cfg.traj_len;
  DenoiserBatch<T> batch;
  batch.noisy = Tensor<T>({bsz, len, 2});
  std::vector<const std::vector<T>*> tokens(bsz);
  for (std::size_t b = 0; b < bsz; ++b) {
    const PointSequence& pts = *items[b].coords;
    if (pts.size() != len)
      throw DimensionError("training trajectory has " + std::to_string(pts.size()) + " samples, model expects " + std::to_string(len));
    const double ab = schedule.alpha_bar(draw.timesteps[b]);
    const double a = std::sqrt(ab), s = std::sqrt(1.0 - ab);
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t o = (b * len + i) * 2;
      batch.noisy[o] = T(a * pts[i].x + s * double(draw.eps[o]));
      batch.noisy[o + 1] = T(a * pts[i].y + s * double(draw.eps[o + 1]));
    }
    const bool drop = draw.drop_condition[b] || items[b].tokens == nullptr;
    tokens[b] = drop ? nullptr : items[b].tokens;
    batch.unconditional.push_back(drop);
    batch.timesteps.push_back(draw.timesteps[b] - 1);
  }
  batch.features = detail::stack_features<T>(cfg, tokens);
  Var<T> predicted = model.forward(params, batch);
  return ops::mse(predicted, params.tape().constant(draw.eps));
}

struct TrainOptions {
  double lr = 1e-4;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  GuidanceConfig guidance;
};

/// Single-writer trainer: owns the optimizer state and the draw RNG.
template <class T>
class Trainer {
 public:
  Trainer(const Denoiser<T>& model, ParameterStore<T>& params, const DiffusionSchedule& schedule, TrainOptions opts)
      : model_(model), params_(params), schedule_(schedule), opts_(opts), adam_(AdamOptions{opts.lr}), rng_(opts.seed) {
    opts_.guidance.validate();
  }

  /// Draws t, eps and condition dropout, applies one Adam update, returns the loss.
  double step(std::span<const Conditioned<T>> items) {
    const auto draw = draw_noise<T>(rng_, items.size(), model_.config().traj_len, schedule_.steps(), opts_.guidance.uncond_dropout);
    Tape<T> tape;
    BoundParameters<T> bound(tape, params_);
    Var<T> loss = denoising_loss(model_, bound, schedule_, items, draw);
    const double value = double(loss.value()[0]);
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "training loss is non-finite at step " << adam_.steps() + 1 << " (timesteps:";
      for (auto t : draw.timesteps) os << ' ' << t;
      os << ')';
      throw NumericError(os.str());
    }
    tape.backward(loss);
    adam_.step(params_, bound.gradients());
    return value;
  }

  long steps_taken() const { return adam_.steps(); }
  Adam<T>& optimizer() { return adam_; }

 private:
  const Denoiser<T>& model_;
  ParameterStore<T>& params_;
  const DiffusionSchedule& schedule_;
  TrainOptions opts_;
  Adam<T> adam_;
  std::mt19937_64 rng_;
};

/// Reverse-process samplers over a fixed set of weights (read-only, thread-safe).
template <class T>
class Sampler {
 public:
  Sampler(const Denoiser<T>& model, const ParameterStore<T>& params, const DiffusionSchedule& schedule,
          GuidanceConfig guidance = {})
      : model_(model), params_(params), schedule_(schedule), guidance_(guidance) {}

  /// eps_theta(x, t, cond) with `t` in 1..T; [B, L, 2].
  Tensor<T> predict(const Tensor<T>& x, std::size_t t, std::span<const std::vector<T>* const> tokens) const {
    const std::size_t bsz = x.dim(0);
    DenoiserBatch<T> batch;
    batch.noisy = x;
    batch.timesteps.assign(bsz, t - 1);
    for (std::size_t b = 0; b < bsz; ++b) batch.unconditional.push_back(tokens[b] == nullptr);
    batch.features = detail::stack_features<T>(model_.config(), tokens);
    Tape<T> tape;
    tape.set_grad_enabled(false);
    BoundParameters<T> bound(tape, params_);
    return model_.forward(bound, batch).value();
  }

  /// Classifier-free guided prediction: both passes run as one batch of 2B.
  Tensor<T> guided(const Tensor<T>& x, std::size_t t, std::span<const std::vector<T>* const> tokens) const {
    const std::size_t bsz = x.dim(0), row = x.size() / bsz;
    Tensor<T> both({2 * bsz, x.dim(1), 2});
    std::copy(x.data.begin(), x.data.end(), both.data.begin());
    std::copy(x.data.begin(), x.data.end(), both.data.begin() + std::ptrdiff_t(x.size()));
    std::vector<const std::vector<T>*> conds(2 * bsz, nullptr);
    std::copy(tokens.begin(), tokens.end(), conds.begin() + std::ptrdiff_t(bsz));
    const Tensor<T> eps = predict(both, t, conds);
    const std::vector<T> uncond(eps.data.begin(), eps.data.begin() + std::ptrdiff_t(bsz * row));
    const std::vector<T> cond(eps.data.begin() + std::ptrdiff_t(bsz * row), eps.data.end());
    return Tensor<T>(x.shape, guided_noise(uncond, cond, guidance_.scale));
  }

  /// Deterministic DDIM (eta = 0) over `steps` evenly spaced timesteps, from seeded N(0, I).
  std::vector<PointSequence> ddim(std::span<const std::vector<T>* const> tokens, std::size_t steps, std::uint64_t seed) const {
    Tensor<T> x = initial_noise(tokens.size(), seed);
    const auto ts = schedule_.subsequence(steps);
    for (std::size_t i = ts.size(); i-- > 0;) {
      const std::size_t t = ts[i], prev = i ? ts[i - 1] : 0;
      const Tensor<T> eps = guided(x, t, tokens);
      const double ab = schedule_.alpha_bar(t), ab_prev = schedule_.alpha_bar(prev);
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double x0 = (double(x[k]) - std::sqrt(1 - ab) * double(eps[k])) / std::sqrt(ab);
        x[k] = T(std::sqrt(ab_prev) * x0 + std::sqrt(1 - ab_prev) * double(eps[k]));
      }
    }
    return finish(x);
  }

  /// Ancestral sampling over all T steps with posterior-variance noise.
  std::vector<PointSequence> ddpm(std::span<const std::vector<T>* const> tokens, std::uint64_t seed) const {
    Tensor<T> x = initial_noise(tokens.size(), seed);
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t t = schedule_.steps(); t >= 1; --t) {
      const Tensor<T> eps = guided(x, t, tokens);
      const double sigma = std::sqrt(schedule_.posterior_variance(t));
      for (std::size_t k = 0; k < x.size(); ++k) {
        double v = reverse_mean(double(x[k]), double(eps[k]), t);
        if (t > 1) v += sigma * normal(rng);
        x[k] = T(v);
      }
    }
    return finish(x);
  }

  /// Mean of p(x_{t-1} | x_t) given a noise prediction.
  double reverse_mean(double xt, double eps, std::size_t t) const {
    return (xt - schedule_.beta(t) / std::sqrt(1.0 - schedule_.alpha_bar(t)) * eps) / std::sqrt(schedule_.alpha(t));
  }

  Tensor<T> initial_noise(std::size_t batch, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor<T> x({batch, model_.config().traj_len, 2});
    for (auto& v : x.data) v = T(normal(rng));
    return x;
  }

 private:
  static std::vector<PointSequence> finish(const Tensor<T>& x) {
    const std::size_t bsz = x.dim(0), len = x.dim(1);
    std::vector<PointSequence> out(bsz, PointSequence(len));
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t i = 0; i < len; ++i)
        out[b][i] = {std::clamp(double(x[(b * len + i) * 2]), -1.0, 1.0), std::clamp(double(x[(b * len + i) * 2 + 1]), -1.0, 1.0)};
    return out;
  }

  const Denoiser<T>& model_;
  const ParameterStore<T>& params_;
  const DiffusionSchedule& schedule_;
  GuidanceConfig guidance_;
};

}  // namespace gazediff
