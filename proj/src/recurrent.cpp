#include "lmkit/recurrent.hpp"

namespace lmkit {

LSTMPCell::LSTMPCell(ParameterStore& params, const std::string& prefix, long input_dim,
                     long hidden_dim, long proj_dim, Rng& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), proj_dim_(proj_dim) {
  long in = input_dim + proj_dim;
  gates_ = &params.add(prefix + ".gates", make_uniform(in, 4 * hidden_dim, in, rng));
  Tensor b(1, 4 * hidden_dim);
  // gate order [i, f, o, g]; forget bias slice starts at hidden_dim
  for (long j = 0; j < hidden_dim; ++j) b.at(0, hidden_dim + j) = 1.0;
  bias_ = &params.add(prefix + ".bias", std::move(b));
  proj_ = &params.add(prefix + ".proj", make_uniform(hidden_dim, proj_dim, hidden_dim, rng));
}

LSTMPCell::LSTMPCell(ParameterStore& params, const std::string& prefix, long input_dim,
                     long hidden_dim, long proj_dim)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), proj_dim_(proj_dim) {
  gates_ = &params.get(prefix + ".gates");
  bias_ = &params.get(prefix + ".bias");
  proj_ = &params.get(prefix + ".proj");
}

std::pair<Value, Value> LSTMPCell::step(Graph& g, Value x, Value h_prev, Value c_prev) const {
  if (x.cols() != input_dim_)
    throw std::invalid_argument("lstm_step: input width " + std::to_string(x.cols()) +
                                " != " + std::to_string(input_dim_));
  Value z = g.affine(g.concat_cols({x, h_prev}), g.param(*gates_), g.param(*bias_));
  long H = hidden_dim_;
  Value i = g.sigmoid(g.slice_cols(z, 0, H));
  Value f = g.sigmoid(g.slice_cols(z, H, H));
  Value o = g.sigmoid(g.slice_cols(z, 2 * H, H));
  Value gg = g.tanh(g.slice_cols(z, 3 * H, H));
  Value c = g.add(g.mul(f, c_prev), g.mul(i, gg));
  Value h = g.matmul(g.mul(o, g.tanh(c)), g.param(*proj_));
  return {h, c};
}

static std::vector<LSTMPCell> make_cells(ParameterStore& params, const std::string& prefix,
                                         long input_dim, long hidden_dim, long proj_dim,
                                         long layers, Rng* rng) {
  if (layers < 1) throw std::invalid_argument("LSTMStack: layers must be >= 1");
  std::vector<LSTMPCell> cells;
  for (long l = 0; l < layers; ++l) {
    long in = l == 0 ? input_dim : proj_dim;
    std::string name = prefix + ".l" + std::to_string(l);
    if (rng)
      cells.emplace_back(params, name, in, hidden_dim, proj_dim, *rng);
    else
      cells.emplace_back(params, name, in, hidden_dim, proj_dim);
  }
  return cells;
}

LSTMStack::LSTMStack(ParameterStore& params, const std::string& prefix, long input_dim,
                     long hidden_dim, long proj_dim, long layers, Rng& rng)
    : cells_(make_cells(params, prefix, input_dim, hidden_dim, proj_dim, layers, &rng)) {}

LSTMStack::LSTMStack(ParameterStore& params, const std::string& prefix, long input_dim,
                     long hidden_dim, long proj_dim, long layers)
    : cells_(make_cells(params, prefix, input_dim, hidden_dim, proj_dim, layers, nullptr)) {}

std::vector<LSTMState> LSTMStack::zero_state(long batch) const {
  std::vector<LSTMState> st;
  for (const auto& c : cells_)
    st.push_back(LSTMState::zeros(batch, c.hidden_dim(), c.proj_dim()));
  return st;
}

Value LSTMStack::step(Graph& g, Value x, std::vector<std::pair<Value, Value>>& states,
                      double dropout_p, bool training, Rng& rng) const {
  if (states.size() != cells_.size())
    throw std::invalid_argument("LSTMStack::step: state count mismatch");
  Value cur = g.dropout(x, dropout_p, training, rng);
  for (size_t l = 0; l < cells_.size(); ++l) {
    auto [h, c] = cells_[l].step(g, cur, states[l].first, states[l].second);
    states[l] = {h, c};
    cur = h;
    if (l + 1 < cells_.size()) cur = g.dropout(cur, dropout_p, training, rng);
  }
  return g.dropout(cur, dropout_p, training, rng);
}

std::vector<std::pair<Value, Value>> LSTMStack::lift(Graph& g,
                                                     const std::vector<LSTMState>& st) const {
  std::vector<std::pair<Value, Value>> out;
  for (const auto& s : st) out.push_back({g.input(s.h), g.input(s.c)});
  return out;
}

std::vector<LSTMState> LSTMStack::detach(const std::vector<std::pair<Value, Value>>& st) const {
  std::vector<LSTMState> out;
  for (const auto& s : st) out.push_back(LSTMState{s.second.tensor(), s.first.tensor()});
  return out;
}

}  // namespace lmkit
