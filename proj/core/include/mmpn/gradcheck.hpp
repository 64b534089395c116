#pragma once

#include <functional>

#include "mmpn/ops.hpp"

namespace mmpn::nn {

// Central-finite-difference verification of reverse-mode gradients.
// `f` maps the current inputs to a scalar Var; it is re-invoked for every
// perturbed coordinate, so it must be a pure function of the inputs.
// Returns the maximum over all coordinates of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
//
// Meant for 64-bit tensors; float inputs lose too much precision in the
// difference quotient.
template <typename T>
double grad_check(const std::function<Var<T>(const std::vector<Var<T>>&)>& f,
                  std::vector<Tensor<T>> inputs, double h = 1e-5) {
  std::vector<Var<T>> vars;
  vars.reserve(inputs.size());
  for (auto& t : inputs) vars.emplace_back(t, true);

  Var<T> out = f(vars);
  if (out.value().size() != 1) throw ValidationError("grad_check: f must return a scalar");
  backward(out);

  double max_rel = 0.0;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    Tensor<T>& x = vars[k].value();
    const Tensor<T>& g = vars[k].grad();
    for (std::size_t i = 0; i < x.size(); ++i) {
      T saved = x[i];
      x[i] = saved + T(h);
      double f_plus;
      {
        NoGradGuard ng;
        f_plus = double(f(vars).value()[0]);
      }
      x[i] = saved - T(h);
      double f_minus;
      {
        NoGradGuard ng;
        f_minus = double(f(vars).value()[0]);
      }
      x[i] = saved;

      double numeric = (f_plus - f_minus) / (2.0 * h);
      double analytic = g.data.empty() ? 0.0 : double(g[i]);
      double rel = std::fabs(analytic - numeric) /
                   std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace mmpn::nn
