#include "lmkit/gradsuite.hpp"

#include <algorithm>

#include "lmkit/corpus.hpp"
#include "lmkit/gradcheck.hpp"
#include "lmkit/graph.hpp"
#include "lmkit/heads.hpp"
#include "lmkit/recurrent.hpp"
#include "lmkit/synth.hpp"

namespace lmkit {

namespace {

Tensor random_tensor(long rows, long cols, Rng& rng, double scale = 0.5) {
  Tensor t(rows, cols);
  for (long i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

Vocabulary tiny_vocab() {
  std::vector<Sentence> sents;
  for (long i = 0; i < 6; ++i) sents.push_back({synth_word(i), synth_word(i + 1)});
  return Vocabulary::build(sents, 10);
}

double check_lstmp(uint64_t seed) {
  ParameterStore params;
  Rng rng(seed);
  LSTMPCell cell(params, "c", 3, 4, 2, rng);
  Tensor x = random_tensor(2, 3, rng), h0 = random_tensor(2, 2, rng),
         c0 = random_tensor(2, 4, rng);
  return finite_diff_check(params, [&] {
    Graph g;
    auto [h, c] = cell.step(g, g.input(x), g.input(h0), g.input(c0));
    Value loss = g.add(g.sum_all(h), g.sum_all(g.tanh(c)));
    g.backward(loss);
    return loss.scalar();
  });
}

double check_stack2(uint64_t seed) {
  ParameterStore params;
  Rng rng(seed);
  LSTMStack stack(params, "s", 3, 4, 2, 2, rng);
  Tensor x1 = random_tensor(2, 3, rng), x2 = random_tensor(2, 3, rng);
  return finite_diff_check(params, [&] {
    Graph g;
    Rng drop(0);
    auto states = stack.lift(g, stack.zero_state(2));
    Value h1 = stack.step(g, g.input(x1), states, 0.0, false, drop);
    Value h2 = stack.step(g, g.input(x2), states, 0.0, false, drop);
    Value loss = g.add(g.sum_all(h1), g.sum_all(g.tanh(h2)));
    g.backward(loss);
    return loss.scalar();
  });
}

double check_charcnn(uint64_t seed) {
  ParameterStore params;
  Rng rng(seed);
  CharCNNConfig cfg;
  cfg.char_dim = 3;
  cfg.widths = {1, 2};
  cfg.features = {2, 2};
  cfg.out_dim = 4;
  CharCodec codec(5);
  CharCNNEmbedder emb(params, "e", cfg, codec, rng);
  std::vector<std::string> words = {"ab", "cde", "f"};
  return finite_diff_check(params, [&] {
    Graph g;
    Value e = emb.embed_words(g, words);
    Value loss = g.sum_all(g.tanh(e));
    g.backward(loss);
    return loss.scalar();
  });
}

double check_full_softmax(uint64_t seed) {
  ParameterStore params;
  Rng rng(seed);
  FullSoftmaxHead head(params, "f", 6, 3, rng);
  Parameter& h = params.add("h", random_tensor(2, 3, rng));
  std::vector<long> targets = {1, 4};
  return finite_diff_check(params, [&] {
    Graph g;
    Value lp = g.pick(head.logprobs(g, g.param(h)), targets);
    Value loss = g.scale(g.mean_all(lp), -1.0);
    g.backward(loss);
    return loss.scalar();
  });
}

double check_sampled(uint64_t seed, bool nce) {
  ParameterStore params;
  Rng rng(seed);
  FullSoftmaxHead head(params, "f", 6, 3, rng);
  Parameter& h = params.add("h", random_tensor(2, 3, rng));
  std::vector<double> proposal = {0.1, 0.2, 0.15, 0.25, 0.2, 0.1};
  // target first, then the shared samples (a collision with the target kept)
  std::vector<WordId> ids = {1, 0, 3, 1, 4, 0, 3, 1};
  long k = 3;
  return finite_diff_check(params, [&] {
    Graph g;
    Value logits = candidate_logits(g, g.param(h), g.param(head.table()), ids, k + 1);
    Value loss = nce ? nce_loss(g, logits, ids, proposal, k) : is_loss(g, logits, ids, proposal);
    g.backward(loss);
    return loss.scalar();
  });
}

double check_cnn_softmax(uint64_t seed) {
  ParameterStore params;
  Rng rng(seed);
  Vocabulary vocab = tiny_vocab();
  CharCNNConfig cfg;
  cfg.char_dim = 3;
  cfg.widths = {1, 2};
  cfg.features = {2, 2};
  cfg.out_dim = 3;
  CharCodec codec(6);
  CNNSoftmaxHead head(params, "cs", cfg, codec, vocab, 2, rng);
  Parameter& h = params.add("h", random_tensor(2, 3, rng));
  std::vector<WordId> uniq = {0, 1, 3, 4};
  std::vector<long> local = {1, 0, 2, 3, 2, 1, 0, 3};
  std::vector<double> proposal(static_cast<size_t>(vocab.size()),
                               1.0 / static_cast<double>(vocab.size()));
  std::vector<WordId> ids(local.size());
  for (size_t i = 0; i < local.size(); ++i) ids[i] = uniq[static_cast<size_t>(local[i])];
  return finite_diff_check(params, [&] {
    Graph g;
    Value e = head.embeddings_for(g, uniq);
    Value logits = g.gathered_scores(g.param(h), e, local, 4);
    Value loss = is_loss(g, logits, ids, proposal);
    g.backward(loss);
    return loss.scalar();
  });
}

double check_char_head(uint64_t seed) {
  ParameterStore params;
  Rng rng(seed);
  CharCodec codec(6);
  CharLSTMHead head(params, "ch", 3, 2, 3, codec, rng);
  Parameter& h = params.add("h", random_tensor(2, 3, rng));
  std::vector<long> codes;
  for (const std::string w : {"ab", "cde"}) {
    auto c = codec.encode(w);
    codes.insert(codes.end(), c.begin(), c.end());
  }
  return finite_diff_check(params, [&] {
    Graph g;
    Value loss = head.loss(g, g.param(h), codes);
    g.backward(loss);
    return loss.scalar();
  });
}

}  // namespace

std::vector<GradCheckCase> run_gradient_suite(uint64_t seed) {
  return {
      {"lstmp", check_lstmp(seed)},
      {"lstm-stack-2", check_stack2(seed + 1)},
      {"char-cnn", check_charcnn(seed + 2)},
      {"full-softmax", check_full_softmax(seed + 3)},
      {"is-loss", check_sampled(seed + 4, false)},
      {"nce-loss", check_sampled(seed + 5, true)},
      {"cnn-softmax-correction", check_cnn_softmax(seed + 6)},
      {"char-lstm-head", check_char_head(seed + 7)},
  };
}

double max_suite_error(const std::vector<GradCheckCase>& cases) {
  double m = 0.0;
  for (const auto& c : cases) m = std::max(m, c.max_rel_err);
  return m;
}

}  // namespace lmkit
