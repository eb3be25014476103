#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "lmkit/optim.hpp"
#include "lmkit/tensor.hpp"

namespace lmkit {

// Compares analytic gradients (left in each Parameter's grad by the caller's
// loss function calling Graph::backward) against central finite differences.
// `loss` must be deterministic at the current point. Returns the max relative
// error over all parameter elements.
inline double finite_diff_check(ParameterStore& params,
                                const std::function<double()>& loss,
                                double eps = 1e-5) {
  zero_grads(params);
  double base = loss();
  if (!std::isfinite(base)) throw std::runtime_error("finite_diff_check: non-finite loss");

  // snapshot analytic grads, then clear so probe evaluations don't pollute
  std::vector<Tensor> analytic;
  for (auto& p : params) analytic.push_back(p->grad);
  zero_grads(params);

  double max_rel = 0.0;
  size_t pi = 0;
  for (auto& p : params) {
    for (long i = 0; i < p->value.size(); ++i) {
      double saved = p->value[i];
      p->value[i] = saved + eps;
      double lp = loss();
      p->value[i] = saved - eps;
      double lm = loss();
      p->value[i] = saved;
      zero_grads(params);
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw std::runtime_error("finite_diff_check: non-finite probe loss");
      double numeric = (lp - lm) / (2.0 * eps);
      double a = analytic[pi][i];
      // the absolute floor keeps central-difference cancellation noise from
      // dominating elements whose true gradient is (near) zero
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (rel > max_rel) max_rel = rel;
    }
    ++pi;
  }
  return max_rel;
}

}  // namespace lmkit
