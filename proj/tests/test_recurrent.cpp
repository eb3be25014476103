#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lmkit/recurrent.hpp"

using namespace lmkit;

namespace {

// zero the gate and projection weights, keeping the default bias (forget
// gate biased to 1, everything else 0)
void zero_weights(ParameterStore& ps, const std::string& prefix) {
  ps.get(prefix + ".gates").value.set_zero();
  ps.get(prefix + ".proj").value.set_zero();
}

void set_identity(Tensor& t) {
  t.set_zero();
  for (long i = 0; i < std::min(t.rows(), t.cols()); ++i) t.at(i, i) = 1.0;
}

}  // namespace

TEST_CASE("zero-weight cell: zero initial state stays zero") {
  ParameterStore ps;
  Rng rng(1);
  LSTMPCell cell(ps, "c", 3, 4, 2, rng);
  zero_weights(ps, "c");
  Graph g(false);
  Value x = g.input(Tensor::full(1, 3, 0.7));
  Value h0 = g.input(Tensor(1, 2));
  Value c0 = g.input(Tensor(1, 4));
  auto [h, c] = cell.step(g, x, h0, c0);
  for (long i = 0; i < 4; ++i) CHECK(c.tensor()[i] == 0.0);
  for (long i = 0; i < 2; ++i) CHECK(h.tensor()[i] == 0.0);
}

TEST_CASE("zero-weight cell: memory decays by sigmoid(1) per step") {
  ParameterStore ps;
  Rng rng(1);
  LSTMPCell cell(ps, "c", 3, 4, 4, rng);
  zero_weights(ps, "c");
  set_identity(ps.get("c.proj").value);
  Tensor c0t = Tensor::row({0.5, -1.0, 2.0, 0.0});
  Graph g(false);
  auto [h, c] = cell.step(g, g.input(Tensor(1, 3)), g.input(Tensor(1, 4)), g.input(c0t));
  double sig1 = 1.0 / (1.0 + std::exp(-1.0));
  for (long i = 0; i < 4; ++i) {
    double want_c = sig1 * c0t[i];
    CHECK(c.tensor()[i] == doctest::Approx(want_c).epsilon(1e-12));
    // o = sigmoid(0) = 0.5 and the projection is the identity
    CHECK(h.tensor()[i] == doctest::Approx(0.5 * std::tanh(want_c)).epsilon(1e-12));
  }
}

TEST_CASE("one-layer stack step equals the bare cell step") {
  ParameterStore ps;
  Rng rng(7);
  LSTMStack stack(ps, "s", 3, 5, 2, 1, rng);
  LSTMPCell cell(ps, "s.l0", 3, 5, 2);  // attach to the same parameters

  Rng xr(9), dummy;
  Tensor x(2, 3);
  for (long i = 0; i < x.size(); ++i) x[i] = xr.uniform(-1, 1);

  Graph g(false);
  Value xv = g.input(x);
  auto lifted = stack.lift(g, stack.zero_state(2));
  Value h_stack = stack.step(g, xv, lifted, 0.0, false, dummy);
  auto [h_cell, c_cell] = cell.step(g, xv, g.input(Tensor(2, 2)), g.input(Tensor(2, 5)));
  for (long i = 0; i < h_stack.tensor().size(); ++i)
    CHECK(h_stack.tensor()[i] == h_cell.tensor()[i]);
}

TEST_CASE("two windows of 10 match one window of 20 in forward") {
  ParameterStore ps;
  Rng rng(3);
  LSTMStack stack(ps, "s", 2, 4, 3, 2, rng);
  Rng xr(11), dummy;
  std::vector<Tensor> xs;
  for (int t = 0; t < 20; ++t) {
    Tensor x(1, 2);
    for (long i = 0; i < 2; ++i) x[i] = xr.uniform(-1, 1);
    xs.push_back(x);
  }

  auto run = [&](const std::vector<long>& window_lens) {
    std::vector<LSTMState> carried = stack.zero_state(1);
    Tensor last_h;
    size_t t = 0;
    for (long len : window_lens) {
      Graph g(false);
      auto st = stack.lift(g, carried);
      Value h{nullptr, -1};
      for (long i = 0; i < len; ++i) h = stack.step(g, g.input(xs[t++]), st, 0.0, false, dummy);
      carried = stack.detach(st);
      last_h = h.tensor();
    }
    return last_h;
  };

  Tensor one = run({20});
  Tensor two = run({10, 10});
  for (long i = 0; i < one.size(); ++i) CHECK(one[i] == two[i]);
}

TEST_CASE("carried state matters: zeroing it changes the output") {
  ParameterStore ps;
  Rng rng(5);
  LSTMStack stack(ps, "s", 2, 4, 3, 1, rng);
  Rng dummy;
  Tensor x = Tensor::row({0.3, -0.8});

  std::vector<LSTMState> warm = stack.zero_state(1);
  {
    Graph g(false);
    auto st = stack.lift(g, warm);
    stack.step(g, g.input(x), st, 0.0, false, dummy);
    warm = stack.detach(st);
  }
  Graph g(false);
  auto st_warm = stack.lift(g, warm);
  auto st_cold = stack.lift(g, stack.zero_state(1));
  Value h_warm = stack.step(g, g.input(x), st_warm, 0.0, false, dummy);
  Value h_cold = stack.step(g, g.input(x), st_cold, 0.0, false, dummy);
  bool differs = false;
  for (long i = 0; i < h_warm.tensor().size(); ++i)
    if (h_warm.tensor()[i] != h_cold.tensor()[i]) differs = true;
  CHECK(differs);
}

TEST_CASE("identity projection reduces to a vanilla LSTM") {
  ParameterStore ps;
  Rng rng(13);
  LSTMPCell cell(ps, "c", 2, 3, 3, rng);
  set_identity(ps.get("c.proj").value);
  Tensor x = Tensor::row({0.4, -0.2});
  Tensor h0 = Tensor::row({0.1, 0.0, -0.3});
  Tensor c0 = Tensor::row({0.2, -0.5, 0.7});

  Graph g(false);
  auto [h, c] = cell.step(g, g.input(x), g.input(h0), g.input(c0));

  // hand-computed vanilla LSTM with the same weights
  const Tensor& w = ps.get("c.gates").value;  // [5, 12], gate order i f o g
  const Tensor& b = ps.get("c.bias").value;
  std::vector<double> in = {x[0], x[1], h0[0], h0[1], h0[2]};
  for (long j = 0; j < 3; ++j) {
    auto gate = [&](long block) {
      double z = b.at(0, block * 3 + j);
      for (long r = 0; r < 5; ++r) z += in[static_cast<size_t>(r)] * w.at(r, block * 3 + j);
      return z;
    };
    double i_g = 1.0 / (1.0 + std::exp(-gate(0)));
    double f_g = 1.0 / (1.0 + std::exp(-gate(1)));
    double o_g = 1.0 / (1.0 + std::exp(-gate(2)));
    double g_g = std::tanh(gate(3));
    double want_c = f_g * c0[j] + i_g * g_g;
    CHECK(c.tensor()[j] == doctest::Approx(want_c).epsilon(1e-12));
    CHECK(h.tensor()[j] == doctest::Approx(o_g * std::tanh(want_c)).epsilon(1e-12));
  }
}

TEST_CASE("memory cell stays finite over 10000 steps") {
  ParameterStore ps;
  Rng rng(17);
  LSTMStack stack(ps, "s", 2, 4, 3, 1, rng);
  Rng xr(19), dummy;
  std::vector<LSTMState> carried = stack.zero_state(1);
  for (int t = 0; t < 10000; ++t) {
    Graph g(false);
    auto st = stack.lift(g, carried);
    Tensor x(1, 2);
    for (long i = 0; i < 2; ++i) x[i] = xr.uniform(-2, 2);
    stack.step(g, g.input(x), st, 0.0, false, dummy);
    carried = stack.detach(st);
  }
  CHECK(carried[0].c.all_finite());
  CHECK(carried[0].h.all_finite());
}
