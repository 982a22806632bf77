#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "gazediff/core/parameters.hpp"

namespace gazediff {

namespace detail {

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(numeric) + 1e-8);
}

template <class F>
double eval_scalar(F& f, const Tensor<double>& x) {
  Tape<double> tape;
  tape.set_grad_enabled(false);
  const double v = f(tape, tape.constant(x)).value()[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite forward value");
  return v;
}

}  // namespace detail

/// Max over coordinates of |analytic - central difference| / (|central difference| + 1e-8).
/// `f(tape, x)` must return a scalar Var.
template <class F>
double grad_check(F f, const Tensor<double>& x, double eps = 1e-5) {
  if (!(eps > 0)) throw std::invalid_argument("grad_check: eps must be positive");
  Tape<double> tape;
  Var<double> xv = tape.variable(x);
  Var<double> y = f(tape, xv);
  if (!std::isfinite(y.value()[0])) throw NumericError("grad_check: non-finite forward value");
  tape.backward(y);
  const Tensor<double> analytic = tape.grad_of(xv);

  double worst = 0;
  Tensor<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = detail::eval_scalar(f, probe);
    probe[i] = x[i] - eps;
    const double down = detail::eval_scalar(f, probe);
    probe[i] = x[i];
    worst = std::max(worst, detail::relative_error(analytic[i], (up - down) / (2 * eps)));
  }
  return worst;
}

/// Central-difference check of every parameter of `store`, reported per parameter name.
/// `loss(tape, params)` must return a scalar Var; it is re-evaluated 2x per coordinate.
template <class F>
std::map<std::string, double> grad_check_parameters(F loss, ParameterStore<double>& store, double eps = 1e-4) {
  std::map<std::string, Tensor<double>> analytic;
  {
    Tape<double> tape;
    BoundParameters<double> bound(tape, store);
    Var<double> y = loss(tape, bound);
    if (!std::isfinite(y.value()[0])) throw NumericError("grad_check: non-finite forward value");
    tape.backward(y);
    analytic = bound.gradients();
  }
  auto evaluate = [&] {
    Tape<double> tape;
    tape.set_grad_enabled(false);
    BoundParameters<double> bound(tape, store);
    const double v = loss(tape, bound).value()[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite forward value");
    return v;
  };

  std::map<std::string, double> worst;
  for (auto& [name, param] : store.entries()) {
    double w = 0;
    auto it = analytic.find(name);
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double orig = param[i];
      param[i] = orig + eps;
      const double up = evaluate();
      param[i] = orig - eps;
      const double down = evaluate();
      param[i] = orig;
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      w = std::max(w, detail::relative_error(a, (up - down) / (2 * eps)));
    }
    worst[name] = w;
  }
  return worst;
}

}  // namespace gazediff
