#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lmkit/gradcheck.hpp"
#include "lmkit/graph.hpp"
#include "lmkit/optim.hpp"
#include "lmkit/prng.hpp"

using namespace lmkit;

TEST_CASE("log_softmax of equal logits is uniform") {
  Graph g(false);
  Value lp = g.log_softmax(g.input(Tensor::row({0.0, 0.0})));
  CHECK(lp.tensor().at(0, 0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(lp.tensor().at(0, 1) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("log_softmax rows exponentiate to 1") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x(4, 7);
    for (long i = 0; i < x.size(); ++i) x[i] = rng.uniform(-8, 8);
    Graph g(false);
    const Tensor& lp = g.log_softmax(g.input(x)).tensor();
    for (long r = 0; r < 4; ++r) {
      double s = 0;
      for (long c = 0; c < 7; ++c) s += std::exp(lp.at(r, c));
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("matmul by identity is the identity") {
  Tensor id(3, 3);
  for (long i = 0; i < 3; ++i) id.at(i, i) = 1.0;
  Rng rng(5);
  Tensor x(3, 4);
  for (long i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
  Graph g(false);
  const Tensor& y = g.matmul(g.input(id), g.input(x)).tensor();
  for (long i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("tanh gradient at zero is one") {
  ParameterStore ps;
  Parameter& p = ps.add("x", Tensor(1, 1));
  Graph g;
  Value loss = g.sum_all(g.tanh(g.param(p)));
  g.backward(loss);
  CHECK(p.grad[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adagrad: zero gradient leaves value and accumulator alone") {
  ParameterStore ps;
  Parameter& p = ps.add("x", Tensor::row({1.5, -2.0}));
  adagrad_update(p, 0.2);
  CHECK(p.value[0] == 1.5);
  CHECK(p.value[1] == -2.0);
  CHECK(p.accum[0] == 0.0);
}

TEST_CASE("adagrad: first step is lr times the gradient sign") {
  ParameterStore ps;
  Parameter& p = ps.add("x", Tensor::row({0.0}));
  p.grad[0] = 3.0;
  adagrad_update(p, 0.2);
  // accumulator starts at zero, so g/sqrt(g*g) = sign(g)
  CHECK(p.value[0] == doctest::Approx(-0.2).epsilon(1e-8));
  CHECK(p.accum[0] == doctest::Approx(9.0));
}

TEST_CASE("adagrad: second identical step shrinks by sqrt(2)") {
  ParameterStore ps;
  Parameter& p = ps.add("x", Tensor::row({0.0}));
  p.grad[0] = 3.0;
  adagrad_update(p, 0.2);
  double after_first = p.value[0];
  p.grad[0] = 3.0;
  adagrad_update(p, 0.2);
  CHECK(p.value[0] - after_first == doctest::Approx(-0.2 / std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("adagrad: no step ever exceeds lr in magnitude") {
  ParameterStore ps;
  Parameter& p = ps.add("x", Tensor(1, 16));
  Rng rng(9);
  for (int s = 0; s < 50; ++s) {
    Tensor before = p.value;
    for (long i = 0; i < 16; ++i) p.grad[i] = rng.uniform(-5, 5);
    adagrad_update(p, 0.2);
    for (long i = 0; i < 16; ++i) CHECK(std::abs(p.value[i] - before[i]) <= 0.2 + 1e-12);
  }
}

TEST_CASE("clip_global_norm scales [3,4] to [0.6,0.8]") {
  ParameterStore ps;
  Parameter& p = ps.add("x", Tensor::row({0.0, 0.0}));
  p.grad[0] = 3.0;
  p.grad[1] = 4.0;
  double scale = clip_global_norm(ps, 1.0);
  CHECK(scale == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p.grad[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(p.grad[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("clip_global_norm leaves an in-bound gradient untouched") {
  ParameterStore ps;
  Parameter& p = ps.add("x", Tensor::row({0.0, 0.0}));
  p.grad[0] = 0.6;
  p.grad[1] = 0.8;  // norm exactly at the bound
  CHECK(clip_global_norm(ps, 1.0) == 1.0);
  CHECK(p.grad[0] == 0.6);
  CHECK(p.grad[1] == 0.8);
}

TEST_CASE("clip_global_norm is idempotent") {
  ParameterStore ps;
  Parameter& p = ps.add("x", Tensor::row({7.0, -2.0, 4.0}));
  p.grad = p.value;
  clip_global_norm(ps, 1.0);
  Tensor once = p.grad;
  clip_global_norm(ps, 1.0);
  for (long i = 0; i < 3; ++i) CHECK(p.grad[i] == doctest::Approx(once[i]).epsilon(1e-12));
}

TEST_CASE("dropout identities") {
  Rng rng(1);
  Tensor x(2, 3);
  for (long i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
  Graph g(false);
  Value in = g.input(x);
  SUBCASE("p=0 is the identity") {
    const Tensor& y = g.dropout(in, 0.0, true, rng).tensor();
    for (long i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  }
  SUBCASE("inference mode is the identity") {
    const Tensor& y = g.dropout(in, 0.9, false, rng).tensor();
    for (long i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  }
}

TEST_CASE("dropout preserves the mean within 1%") {
  Rng rng(42);
  Tensor x = Tensor::full(100, 1000, 1.0);
  Graph g(false);
  const Tensor& y = g.dropout(g.input(x), 0.3, true, rng).tensor();
  double mean = 0;
  for (long i = 0; i < y.size(); ++i) mean += y[i];
  mean /= static_cast<double>(y.size());
  CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
}

namespace {

// runs finite_diff_check on a single-primitive loss over 5 seeds
double primitive_check(const std::function<Value(Graph&, Value)>& op, long rows, long cols) {
  double worst = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    ParameterStore ps;
    Rng rng(seed);
    Tensor init(rows, cols);
    for (long i = 0; i < init.size(); ++i) init[i] = rng.uniform(-0.9, 0.9);
    Parameter& p = ps.add("x", std::move(init));
    auto loss = [&]() {
      Graph g;
      Value l = g.sum_all(op(g, g.param(p)));
      g.backward(l);
      return l.scalar();
    };
    worst = std::max(worst, finite_diff_check(ps, loss));
  }
  return worst;
}

}  // namespace

TEST_CASE("per-primitive finite-difference checks") {
  CHECK(primitive_check([](Graph& g, Value x) { return g.tanh(x); }, 2, 3) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.sigmoid(x); }, 2, 3) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.softplus(x); }, 2, 3) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.relu(g.add_const(x, Tensor::full(2, 3, 0.05))); },
                        2, 3) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.mul(x, g.tanh(x)); }, 2, 3) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.matmul(x, x, false, true); }, 3, 3) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.log_softmax(x); }, 2, 4) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.pick(g.log_softmax(x), {1, 0}); }, 2, 4) <
        1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.scale(x, 2.5); }, 2, 3) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.slice_cols(x, 1, 2); }, 2, 4) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.group_max(x, 2); }, 4, 3) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.lookup(x, {2, 0, 2, 1}); }, 3, 3) < 1e-6);
  CHECK(primitive_check(
            [](Graph& g, Value x) { return g.gathered_scores(x, x, {0, 2, 1, 0, 2, 2}, 2); }, 3, 3) <
        1e-6);
  CHECK(primitive_check(
            [](Graph& g, Value x) { return g.concat_cols({x, g.tanh(x)}); }, 2, 3) < 1e-6);
  CHECK(primitive_check([](Graph& g, Value x) { return g.mean_all(g.mul(x, x)); }, 2, 3) < 1e-6);
}

TEST_CASE("affine finite-difference check") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    ParameterStore ps;
    Rng rng(seed);
    Parameter& x = ps.add("x", make_uniform(2, 3, 3, rng));
    Parameter& w = ps.add("w", make_uniform(3, 4, 3, rng));
    Parameter& b = ps.add("b", make_uniform(1, 4, 4, rng));
    auto loss = [&]() {
      Graph g;
      Value l = g.sum_all(g.tanh(g.affine(g.param(x), g.param(w), g.param(b))));
      g.backward(l);
      return l.scalar();
    };
    CHECK(finite_diff_check(ps, loss) < 1e-6);
  }
}
