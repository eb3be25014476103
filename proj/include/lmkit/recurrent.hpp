#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lmkit/graph.hpp"
#include "lmkit/optim.hpp"
#include "lmkit/tensor.hpp"

namespace lmkit {

// Carried per-stream recurrent state: memory cell c [B, hidden] and projected
// hidden h [B, proj].
struct LSTMState {
  Tensor c;
  Tensor h;
  static LSTMState zeros(long batch, long hidden, long proj) {
    return LSTMState{Tensor(batch, hidden), Tensor(batch, proj)};
  }
};

// LSTM cell with a projection layer: gates from affine([x; h_prev]),
// c' = f.c + i.g, h = P^T (o.tanh(c')). Forget-gate bias initialized to 1.
class LSTMPCell {
 public:
  LSTMPCell(ParameterStore& params, const std::string& prefix, long input_dim, long hidden_dim,
            long proj_dim, Rng& rng);
  // attach to already-existing parameters (checkpoint load)
  LSTMPCell(ParameterStore& params, const std::string& prefix, long input_dim, long hidden_dim,
            long proj_dim);

  long input_dim() const { return input_dim_; }
  long hidden_dim() const { return hidden_dim_; }
  long proj_dim() const { return proj_dim_; }

  // x: [B, input_dim]; h_prev: [B, proj]; c_prev: [B, hidden].
  // Returns (h, c) values.
  std::pair<Value, Value> step(Graph& g, Value x, Value h_prev, Value c_prev) const;

 private:
  long input_dim_, hidden_dim_, proj_dim_;
  Parameter* gates_;  // [input+proj, 4*hidden]
  Parameter* bias_;   // [1, 4*hidden]
  Parameter* proj_;   // [hidden, proj]
};

// Multi-layer LSTMP with dropout before the first layer, between layers, and
// after the top layer (training mode only).
class LSTMStack {
 public:
  LSTMStack(ParameterStore& params, const std::string& prefix, long input_dim, long hidden_dim,
            long proj_dim, long layers, Rng& rng);
  LSTMStack(ParameterStore& params, const std::string& prefix, long input_dim, long hidden_dim,
            long proj_dim, long layers);

  long layers() const { return static_cast<long>(cells_.size()); }
  long proj_dim() const { return cells_.back().proj_dim(); }
  long hidden_dim() const { return cells_.back().hidden_dim(); }
  long input_dim() const { return cells_.front().input_dim(); }

  std::vector<LSTMState> zero_state(long batch) const;

  // states are graph values, one (h, c) pair per layer; returns top h after
  // the trailing dropout.
  Value step(Graph& g, Value x, std::vector<std::pair<Value, Value>>& states, double dropout_p,
             bool training, Rng& rng) const;

  // lift carried tensors into graph inputs at the start of an unroll window
  std::vector<std::pair<Value, Value>> lift(Graph& g, const std::vector<LSTMState>& st) const;
  // detach graph values back to tensors at the end of a window (truncation)
  std::vector<LSTMState> detach(const std::vector<std::pair<Value, Value>>& st) const;

 private:
  std::vector<LSTMPCell> cells_;
};

}  // namespace lmkit
