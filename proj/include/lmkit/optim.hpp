#pragma once

#include <cmath>
#include <vector>

#include "lmkit/prng.hpp"
#include "lmkit/tensor.hpp"

namespace lmkit {

constexpr double kAdagradEps = 1e-8;

// accum += g*g; value -= lr * g / sqrt(accum + eps); grad cleared.
inline void adagrad_update(Parameter& p, double lr, double eps = kAdagradEps) {
  if (p.frozen) {
    p.grad.set_zero();
    return;
  }
  double step = lr * p.lr_scale;
  for (long i = 0; i < p.value.size(); ++i) {
    double g = p.grad[i];
    if (g == 0.0) continue;
    p.accum[i] += g * g;
    p.value[i] -= step * g / std::sqrt(p.accum[i] + eps);
  }
  p.grad.set_zero();
}

inline void adagrad_update(ParameterStore& params, double lr, double eps = kAdagradEps) {
  for (auto& p : params) adagrad_update(*p, lr, eps);
}

// Scales all gradients so their joint L2 norm is at most max_norm. Returns the
// scale that was applied (1.0 when already within bound).
inline double clip_global_norm(ParameterStore& params, double max_norm = 1.0) {
  double sq = 0.0;
  for (auto& p : params)
    for (long i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
  double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  double scale = max_norm / norm;
  for (auto& p : params) p->grad.mat() *= scale;
  return scale;
}

inline void zero_grads(ParameterStore& params) {
  for (auto& p : params) p->grad.set_zero();
}

// uniform +-1/sqrt(fan_in)
inline void init_uniform_fanin(Tensor& t, long fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

inline Tensor make_uniform(long rows, long cols, long fan_in, Rng& rng) {
  Tensor t(rows, cols);
  init_uniform_fanin(t, fan_in, rng);
  return t;
}

}  // namespace lmkit
