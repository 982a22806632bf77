#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "gazediff/core/tensor.hpp"

namespace gazediff {

/// Linear beta schedule over steps t = 1..T. Index 0 of alpha_bar() is the clean state (1).
class DiffusionSchedule {
 public:
  DiffusionSchedule(std::size_t steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2) {
    if (steps == 0) throw std::invalid_argument("schedule: T_diff must be >= 1");
    if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end))
      throw std::invalid_argument("schedule: need 0 < beta_start <= beta_end < 1");
    betas_.resize(steps);
    alpha_bars_.resize(steps);
    double running = 1.0;
    for (std::size_t i = 0; i < steps; ++i) {
      betas_[i] = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * double(i) / double(steps - 1);
      running *= 1.0 - betas_[i];
      alpha_bars_[i] = running;
    }
  }

  std::size_t steps() const { return betas_.size(); }
  double beta(std::size_t t) const { return betas_.at(index(t)); }
  double alpha(std::size_t t) const { return 1.0 - beta(t); }
  double alpha_bar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bars_.at(index(t)); }

  /// Variance of q(x_{t-1} | x_t, x_0).
  double posterior_variance(std::size_t t) const {
    return beta(t) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
  }

  const std::vector<double>& betas() const { return betas_; }

  /// Evenly spaced sampling subsequence in ascending order, always ending at T.
  std::vector<std::size_t> subsequence(std::size_t count) const {
    if (count == 0 || count > steps()) throw std::invalid_argument("schedule: sampling steps must be in [1, T_diff]");
    std::vector<std::size_t> ts(count);
    for (std::size_t i = 0; i < count; ++i) ts[i] = (i + 1) * steps() / count;
    return ts;
  }

 private:
  std::size_t index(std::size_t t) const {
    if (t < 1 || t > steps()) throw std::out_of_range("diffusion step " + std::to_string(t) + " outside [1, T]");
    return t - 1;
  }

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

/// R_t = sqrt(abar_t) R_0 + sqrt(1 - abar_t) eps
template <class T>
Tensor<T> forward_noise(const DiffusionSchedule& s, const Tensor<T>& clean, std::size_t t, const Tensor<T>& eps) {
  require_shape(eps.shape, clean.shape, "forward_noise");
  const double ab = s.alpha_bar(t);
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  Tensor<T> out(clean.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(a * double(clean[i]) + b * double(eps[i]));
  return out;
}

struct GuidanceConfig {
  double scale = 4.0;
  double uncond_dropout = 0.10;

  void validate() const {
    if (!(uncond_dropout >= 0 && uncond_dropout <= 1)) throw std::invalid_argument("uncond_dropout must be in [0, 1]");
  }
};

/// (1 - c) * eps_uncond + c * eps_cond
template <class T>
std::vector<T> guided_noise(const std::vector<T>& eps_uncond, const std::vector<T>& eps_cond, double c) {
  if (eps_uncond.size() != eps_cond.size()) throw DimensionError("guided_noise: prediction sizes differ");
  std::vector<T> out(eps_cond.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T((1.0 - c) * double(eps_uncond[i]) + c * double(eps_cond[i]));
  return out;
}

}  // namespace gazediff
