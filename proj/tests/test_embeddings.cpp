#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lmkit/embeddings.hpp"
#include "lmkit/graph.hpp"

using namespace lmkit;

namespace {

CharCNNConfig tiny_cnn_config() {
  CharCNNConfig cfg;
  cfg.char_dim = 4;
  cfg.widths = {1, 2};
  cfg.features = {3, 3};
  cfg.highway_layers = 2;
  cfg.out_dim = 5;
  return cfg;
}

}  // namespace

TEST_CASE("identity embedding table picks out rows") {
  ParameterStore ps;
  Rng rng(1);
  WordEmbeddingTable table(ps, "t", 3, 3, rng);
  Tensor& v = table.table().value;
  v.set_zero();
  for (long i = 0; i < 3; ++i) v.at(i, i) = 1.0;
  Graph g(false);
  const Tensor& e = table.embed(g, {1}).tensor();
  CHECK(e.at(0, 0) == 0.0);
  CHECK(e.at(0, 1) == 1.0);
  CHECK(e.at(0, 2) == 0.0);
}

TEST_CASE("embedding gradients: unused rows zero, repeated ids sum") {
  ParameterStore ps;
  Rng rng(2);
  WordEmbeddingTable table(ps, "t", 4, 2, rng);
  Graph g;
  Value loss = g.sum_all(table.embed(g, {1, 1, 3}));
  g.backward(loss);
  const Tensor& grad = table.table().grad;
  for (long c = 0; c < 2; ++c) {
    CHECK(grad.at(0, c) == 0.0);  // unused
    CHECK(grad.at(2, c) == 0.0);
    CHECK(grad.at(1, c) == 2.0);  // id 1 appears twice
    CHECK(grad.at(3, c) == 1.0);
  }
}

TEST_CASE("zero-weight char CNN embeds every word to zero") {
  ParameterStore ps;
  Rng rng(3);
  CharCodec codec(8);
  CharCNNEmbedder cnn(ps, "e", tiny_cnn_config(), codec, rng);
  for (auto& p : ps) p->value.set_zero();
  Tensor e = cnn.embed_words_tensor({"cat", "dog"});
  for (long i = 0; i < e.size(); ++i) CHECK(e[i] == 0.0);
}

TEST_CASE("char CNN parameter count is independent of the vocabulary") {
  ParameterStore ps1, ps2;
  Rng rng(4);
  CharCodec codec(8);
  CharCNNEmbedder a(ps1, "e", tiny_cnn_config(), codec, rng);
  CharCNNEmbedder b(ps2, "e", tiny_cnn_config(), codec, rng);
  CHECK(a.param_count() == b.param_count());
  CHECK(a.param_count() == ps1.total_values());
}

TEST_CASE("char CNN is a pure function of the character string") {
  ParameterStore ps;
  Rng rng(5);
  CharCodec codec(8);
  CharCNNEmbedder cnn(ps, "e", tiny_cnn_config(), codec, rng);
  Tensor e = cnn.embed_words_tensor({"same", "same"});
  for (long c = 0; c < e.cols(); ++c) CHECK(e.at(0, c) == e.at(1, c));
}

TEST_CASE("highway gate limits") {
  Rng rng(6);
  ParameterStore ps;
  Parameter& wt = ps.add("wt", make_uniform(3, 3, 3, rng));
  Parameter& bt = ps.add("bt", Tensor(1, 3));
  Parameter& wh = ps.add("wh", make_uniform(3, 3, 3, rng));
  Parameter& bh = ps.add("bh", Tensor(1, 3));
  Tensor x = Tensor::row({0.5, -0.3, 0.9});

  SUBCASE("transform gate near 0 passes the input through") {
    for (long i = 0; i < 3; ++i) bt.value[i] = -40.0;
    wt.value.set_zero();
    Graph g(false);
    const Tensor& y =
        highway(g, g.input(x), g.param(wt), g.param(bt), g.param(wh), g.param(bh)).tensor();
    for (long i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-12));
  }
  SUBCASE("transform gate near 1 applies relu(Hx)") {
    for (long i = 0; i < 3; ++i) bt.value[i] = 40.0;
    wt.value.set_zero();
    Graph g(false);
    Value xv = g.input(x);
    // copied: growing the graph below may reallocate node storage
    Tensor y = highway(g, xv, g.param(wt), g.param(bt), g.param(wh), g.param(bh)).tensor();
    Tensor hx = g.relu(g.affine(xv, g.param(wh), g.param(bh))).tensor();
    for (long i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(hx[i]).epsilon(1e-12));
  }
}

TEST_CASE("nearest neighbors: self-query has similarity 1") {
  ParameterStore ps;
  Rng rng(7);
  CharCodec codec(8);
  CharCNNEmbedder cnn(ps, "e", tiny_cnn_config(), codec, rng);
  auto nn = nearest_neighbors(cnn, "cats", 3, {"cats", "dogs", "mice"});
  REQUIRE(nn.size() == 3);
  CHECK(nn[0].word == "cats");
  CHECK(nn[0].similarity == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nearest neighbors: similarity ties break lexicographically") {
  ParameterStore ps;
  Rng rng(8);
  CharCodec codec(8);
  CharCNNEmbedder cnn(ps, "e", tiny_cnn_config(), codec, rng);
  // identical strings embed identically, so both tie at similarity 1
  auto nn = nearest_neighbors(cnn, "tie", 2, {"zzz", "tie", "tie"});
  REQUIRE(nn.size() == 2);
  CHECK(nn[0].word == "tie");
  CHECK(nn[1].word == "tie");
}

TEST_CASE("cosine similarity ignores embedding scale") {
  ParameterStore ps;
  Rng rng(9);
  CharCodec codec(8);
  CharCNNEmbedder cnn(ps, "e", tiny_cnn_config(), codec, rng);
  auto before = nearest_neighbors(cnn, "alpha", 3, {"beta", "gamma", "delta"});
  // scaling the output projection scales every embedding by the same factor
  ps.get("e.out.w").value.mat() *= 3.0;
  ps.get("e.out.b").value.mat() *= 3.0;
  auto after = nearest_neighbors(cnn, "alpha", 3, {"beta", "gamma", "delta"});
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) {
    CHECK(before[i].word == after[i].word);
    CHECK(before[i].similarity == doctest::Approx(after[i].similarity).epsilon(1e-9));
  }
}
