#pragma once

#include <string>
#include <vector>

namespace lmkit {

struct GradCheckCase {
  std::string name;
  double max_rel_err;
};

// Finite-difference checks over every registered architecture at tiny dims:
// the projected LSTM cell, a 2-layer stack, the char-CNN embedder (highway and
// max-pool included), the full softmax, both sampled losses, the CNN softmax
// with correction, and the char-LSTM head.
std::vector<GradCheckCase> run_gradient_suite(uint64_t seed = 7);

double max_suite_error(const std::vector<GradCheckCase>& cases);

}  // namespace lmkit
