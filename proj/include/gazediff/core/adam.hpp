#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gazediff/core/parameters.hpp"

namespace gazediff {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  /// One bias-corrected update of every parameter that has a gradient.
  void step(ParameterStore<T>& store, const std::map<std::string, Tensor<T>>& grads) {
    ++steps_;
    const double c1 = 1.0 - std::pow(opts_.beta1, double(steps_));
    const double c2 = 1.0 - std::pow(opts_.beta2, double(steps_));
    for (auto& [name, param] : store.entries()) {
      auto g = grads.find(name);
      if (g == grads.end()) continue;
      require_shape(g->second.shape, param.shape, "adam gradient");
      auto& [m, v] = moments_[name];
      if (m.empty()) {
        m.assign(param.size(), 0.0);
        v.assign(param.size(), 0.0);
      }
      for (std::size_t i = 0; i < param.size(); ++i) {
        const double gi = g->second[i];
        m[i] = opts_.beta1 * m[i] + (1 - opts_.beta1) * gi;
        v[i] = opts_.beta2 * v[i] + (1 - opts_.beta2) * gi * gi;
        param[i] -= T(opts_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opts_.eps));
      }
    }
  }

  long steps() const { return steps_; }
  const AdamOptions& options() const { return opts_; }
  void set_lr(double lr) { opts_.lr = lr; }

 private:
  AdamOptions opts_;
  long steps_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

}  // namespace gazediff
