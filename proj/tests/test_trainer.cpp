#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "lmkit/synth.hpp"
#include "lmkit/trainer.hpp"

using namespace lmkit;

namespace {

struct Fixture {
  Vocabulary vocab;
  std::vector<SentenceIds> train;
  std::vector<SentenceIds> heldout;
};

Fixture tiny_fixture(long sentences = 120) {
  std::vector<Sentence> all = generate_bigram_corpus(40, sentences, 10, 2025);
  std::vector<Sentence> tr, ho;
  split_corpus(all, 10, tr, ho);
  Fixture f;
  f.vocab = Vocabulary::build(tr, 60);
  for (const auto& s : tr) f.train.push_back(f.vocab.encode(s));
  for (const auto& s : ho) f.heldout.push_back(f.vocab.encode(s));
  return f;
}

ModelConfig tiny_model_config() {
  ModelConfig mc;
  mc.embed_dim = 16;
  mc.hidden = 16;
  mc.proj = 16;
  return mc;
}

TrainConfig tiny_train_config() {
  TrainConfig tc;
  tc.loss = LossKind::kFull;
  tc.lr = 0.1;
  tc.unroll = 8;
  tc.batch = 4;
  tc.max_steps = 20;
  tc.eval_every = 5;
  tc.seed = 3;
  return tc;
}

std::vector<double> snapshot(const ParameterStore& ps) {
  std::vector<double> v;
  for (const auto& p : ps)
    for (long i = 0; i < p->value.size(); ++i) v.push_back(p->value[i]);
  return v;
}

}  // namespace

TEST_CASE("key=value parsing with comments, blanks, and overrides") {
  KVMap kv = parse_kv_lines({"lr = 0.5", "# a comment", "", "batch=8"});
  CHECK(kv.at("lr") == "0.5");
  CHECK(kv.at("batch") == "8");
  apply_overrides(kv, {"lr=0.25", "unroll=4"});
  CHECK(kv.at("lr") == "0.25");
  CHECK(kv.at("unroll") == "4");
  CHECK_THROWS(apply_overrides(kv, {"novalue"}));
}

TEST_CASE("resolved_config rejects unknown keys and round-trips known ones") {
  KVMap kv = {{"lr", "0.05"}, {"hidden", "32"}};
  std::string resolved = resolved_config(kv);
  CHECK(resolved.find("lr=0.05") != std::string::npos);
  CHECK(resolved.find("hidden=32") != std::string::npos);
  CHECK(resolved.find("loss=is") != std::string::npos);  // default included
  KVMap bad = {{"learnrate", "0.05"}};
  CHECK_THROWS(resolved_config(bad));
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.lr = -1;
  CHECK_THROWS(tc.validate());
  tc = TrainConfig{};
  tc.dropout = 1.0;
  CHECK_THROWS(tc.validate());
  tc = TrainConfig{};
  tc.lr = 0.0;  // explicitly allowed: a frozen run
  tc.validate();
}

TEST_CASE("lr=0 leaves every parameter bit-identical") {
  Fixture f = tiny_fixture();
  LanguageModel model(tiny_model_config(), f.vocab, 7);
  std::vector<double> before = snapshot(model.params());
  TrainConfig tc = tiny_train_config();
  tc.lr = 0.0;
  BatchStream stream(f.train, tc.batch);
  Trainer trainer(model, stream, f.heldout, tc);
  trainer.run();
  CHECK(snapshot(model.params()) == before);
}

TEST_CASE("freezing everything leaves parameters unchanged but metrics flowing") {
  Fixture f = tiny_fixture();
  LanguageModel model(tiny_model_config(), f.vocab, 7);
  std::vector<double> before = snapshot(model.params());
  TrainConfig tc = tiny_train_config();
  tc.freeze_except = "no.such.prefix";
  BatchStream stream(f.train, tc.batch);
  Trainer trainer(model, stream, f.heldout, tc);
  std::ostringstream metrics, timing;
  trainer.set_logs(&metrics, &timing);
  TrainResult r = trainer.run();
  CHECK(snapshot(model.params()) == before);
  CHECK(r.steps == tc.max_steps);
  CHECK(!metrics.str().empty());
}

TEST_CASE("same seed and config reproduce the metrics log bit-exactly") {
  Fixture f = tiny_fixture();
  std::string logs[2];
  for (int run = 0; run < 2; ++run) {
    LanguageModel model(tiny_model_config(), f.vocab, 7);
    TrainConfig tc = tiny_train_config();
    tc.loss = LossKind::kIS;
    tc.k = 16;
    BatchStream stream(f.train, tc.batch);
    Trainer trainer(model, stream, f.heldout, tc);
    std::ostringstream metrics, timing;
    trainer.set_logs(&metrics, &timing);
    trainer.run();
    logs[run] = metrics.str();
  }
  CHECK(!logs[0].empty());
  CHECK(logs[0] == logs[1]);
}

TEST_CASE("clipping at step 0: forward loss identical with and without clip") {
  Fixture f = tiny_fixture();
  double first_loss[2];
  double clips[2] = {0.0, 1.0};  // 0 disables clipping
  for (int v = 0; v < 2; ++v) {
    LanguageModel model(tiny_model_config(), f.vocab, 7);
    TrainConfig tc = tiny_train_config();
    tc.clip = clips[v];
    tc.max_steps = 1;
    tc.eval_every = 0;
    BatchStream stream(f.train, tc.batch);
    Trainer trainer(model, stream, f.heldout, tc);
    TrainResult r = trainer.run();
    first_loss[v] = r.last_train_loss;
  }
  CHECK(first_loss[0] == first_loss[1]);
}

TEST_CASE("a small model masters a sharp bigram corpus") {
  // sentences follow a near-deterministic successor chain, so a trained model
  // should reach low perplexity quickly
  std::vector<Sentence> all = generate_bigram_corpus(50, 700, 10, 11);
  std::vector<Sentence> tr, ho;
  split_corpus(all, 10, tr, ho);
  Vocabulary vocab = Vocabulary::build(tr, 60);
  std::vector<SentenceIds> train, heldout;
  for (const auto& s : tr) train.push_back(vocab.encode(s));
  for (const auto& s : ho) heldout.push_back(vocab.encode(s));

  LanguageModel model(tiny_model_config(), vocab, 5);
  TrainConfig tc;
  tc.loss = LossKind::kFull;
  tc.lr = 0.05;
  tc.unroll = 8;
  tc.batch = 8;
  tc.max_steps = 1500;
  tc.eval_every = 0;
  tc.seed = 5;
  BatchStream stream(train, tc.batch);
  Trainer trainer(model, stream, heldout, tc);
  TrainResult r = trainer.run();
  CHECK(r.last_heldout_ppl < 5.0);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  Fixture f = tiny_fixture();
  LanguageModel model(tiny_model_config(), f.vocab, 7);
  // poison one weight so the first forward pass overflows
  for (auto& p : model.params()) p->value.mat().setConstant(1e308);
  TrainConfig tc = tiny_train_config();
  BatchStream stream(f.train, tc.batch);
  Trainer trainer(model, stream, f.heldout, tc);
  CHECK_THROWS(trainer.run());
}
