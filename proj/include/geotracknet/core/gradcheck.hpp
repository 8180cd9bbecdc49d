#pragma once

#include <cstddef>
#include <vector>

#include "geotracknet/core/tape.hpp"

namespace geotracknet::core {

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_group = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares backward() gradients against central finite differences, one
// coordinate at a time. `build` must construct the same scalar function on a
// fresh tape given leaf Vars for `params` (any internal randomness has to be
// fixed by the caller, e.g. via a captured seed).
template <class BuildFn>
GradCheckResult check_gradients(BuildFn&& build, std::vector<Tensor> params, double h) {
  // Analytic pass
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const Tensor& p : params) leaves.push_back(tape.param(p));
    Var out = build(tape, leaves);
    tape.backward(out);
    analytic.reserve(leaves.size());
    for (Var leaf : leaves) analytic.push_back(tape.grad(leaf));
  }

  auto eval = [&](const std::vector<Tensor>& at) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(at.size());
    for (const Tensor& p : at) leaves.push_back(tape.constant(p));
    return tape.scalar_value(build(tape, leaves));
  };

  GradCheckResult result;
  for (std::size_t gi = 0; gi < params.size(); ++gi) {
    for (std::size_t j = 0; j < params[gi].size(); ++j) {
      const double saved = params[gi][j];
      params[gi][j] = saved + h;
      const double fp = eval(params);
      params[gi][j] = saved - h;
      const double fm = eval(params);
      params[gi][j] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = relative_error(analytic[gi][j], numeric);
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_group = gi;
        result.worst_index = j;
        result.worst_analytic = analytic[gi][j];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace geotracknet::core
