#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lmkit/checkpoint.hpp"
#include "lmkit/synth.hpp"
#include "lmkit/trainer.hpp"

using namespace lmkit;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Fixture {
  Vocabulary vocab;
  std::vector<SentenceIds> train;
  std::vector<SentenceIds> heldout;
};

Fixture tiny_fixture() {
  std::vector<Sentence> all = generate_bigram_corpus(40, 120, 10, 2025);
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
  tc.eval_every = 2;
  tc.seed = 3;
  return tc;
}

}  // namespace

TEST_CASE("section container round-trips values") {
  SectionWriter w;
  w.add_string("name", "hello");
  w.add_u64("count", 42);
  Tensor t = Tensor::from({{1.5, -2.0}, {0.0, 3.25}});
  w.add_tensor("t", t);
  w.add_doubles("d", {0.1, 0.2});
  std::string path = "/tmp/lmkit_test_sections.bin";
  w.write(path);

  SectionReader r(path);
  CHECK(r.get_string("name") == "hello");
  CHECK(r.get_u64("count") == 42);
  Tensor t2 = r.get_tensor("t");
  CHECK(t2.shape() == t.shape());
  for (long i = 0; i < t.size(); ++i) CHECK(t2[i] == t[i]);
  CHECK(r.get_doubles("d") == std::vector<double>{0.1, 0.2});
  CHECK(!r.has("missing"));
  CHECK_THROWS(r.get_u64("missing"));
}

TEST_CASE("save -> load -> save produces identical bytes") {
  Fixture f = tiny_fixture();
  LanguageModel model(tiny_model_config(), f.vocab, 7);
  std::string p1 = "/tmp/lmkit_test_rt1.ckpt", p2 = "/tmp/lmkit_test_rt2.ckpt";
  save_model_checkpoint(p1, model);
  LoadedCheckpoint ck = load_checkpoint(p1);
  LanguageModel model2 = model_from_checkpoint(ck, f.vocab);
  save_model_checkpoint(p2, model2);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("loading with the wrong vocabulary is refused") {
  Fixture f = tiny_fixture();
  LanguageModel model(tiny_model_config(), f.vocab, 7);
  std::string path = "/tmp/lmkit_test_wrongvocab.ckpt";
  save_model_checkpoint(path, model);
  Vocabulary other = Vocabulary::build({{"completely", "different", "words"}}, 10);
  LoadedCheckpoint ck = load_checkpoint(path);
  CHECK_THROWS(model_from_checkpoint(ck, other));
}

TEST_CASE("corrupted checkpoints are rejected, never partially loaded") {
  Fixture f = tiny_fixture();
  LanguageModel model(tiny_model_config(), f.vocab, 7);
  std::string path = "/tmp/lmkit_test_corrupt.ckpt";
  save_model_checkpoint(path, model);
  std::string bytes = slurp(path);

  SUBCASE("flipped payload byte breaks the checksum") {
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x5a);
  }
  SUBCASE("bad magic") { bytes[0] = 'X'; }
  SUBCASE("truncated file") { bytes.resize(bytes.size() / 2); }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
  out.close();
  CHECK_THROWS(SectionReader(path));
}

TEST_CASE("a failed save leaves no partial file behind") {
  SectionWriter w;
  w.add_string("x", "y");
  CHECK_THROWS(w.write("/nonexistent-dir/nope.ckpt"));
  std::ifstream probe("/nonexistent-dir/nope.ckpt");
  CHECK(!probe.good());
}

TEST_CASE("resume from a mid-training checkpoint reproduces the full run") {
  Fixture f = tiny_fixture();

  // uninterrupted run: 14 steps
  LanguageModel full(tiny_model_config(), f.vocab, 7);
  TrainConfig tc = tiny_train_config();
  tc.max_steps = 14;
  BatchStream fs(f.train, tc.batch);
  Trainer full_tr(full, fs, f.heldout, tc);
  std::ostringstream full_metrics, timing;
  full_tr.set_logs(&full_metrics, &timing);
  full_tr.run();

  // interrupted run: 6 steps, checkpoint, fresh process resumes to 14
  LanguageModel part(tiny_model_config(), f.vocab, 7);
  TrainConfig tc6 = tc;
  tc6.max_steps = 6;
  BatchStream ps(f.train, tc6.batch);
  Trainer part_tr(part, ps, f.heldout, tc6);
  std::ostringstream part_metrics, timing2;
  part_tr.set_logs(&part_metrics, &timing2);
  part_tr.run();
  std::string ckpt = "/tmp/lmkit_test_resume.ckpt";
  part_tr.save_checkpoint(ckpt);

  LanguageModel resumed(tiny_model_config(), f.vocab, 99);  // different init, fully overwritten
  BatchStream rs(f.train, tc.batch);
  Trainer resumed_tr(resumed, rs, f.heldout, tc);
  std::ostringstream resumed_metrics, timing3;
  resumed_tr.set_logs(&resumed_metrics, &timing3);
  resumed_tr.resume_from(ckpt);
  CHECK(resumed_tr.step() == 6);
  resumed_tr.run();

  // the resumed metrics must be a suffix of the uninterrupted log
  std::string full_log = full_metrics.str();
  std::string tail = resumed_metrics.str();
  REQUIRE(!tail.empty());
  REQUIRE(full_log.size() >= tail.size());
  CHECK(full_log.substr(full_log.size() - tail.size()) == tail);

  // and the final parameters must agree bit-for-bit
  std::string pa = "/tmp/lmkit_test_resume_a.ckpt", pb = "/tmp/lmkit_test_resume_b.ckpt";
  save_model_checkpoint(pa, full);
  save_model_checkpoint(pb, resumed);
  CHECK(slurp(pa) == slurp(pb));
}

TEST_CASE("resume refuses a model-only checkpoint and mismatched architecture") {
  Fixture f = tiny_fixture();
  LanguageModel model(tiny_model_config(), f.vocab, 7);
  std::string path = "/tmp/lmkit_test_modelonly.ckpt";
  save_model_checkpoint(path, model);

  TrainConfig tc = tiny_train_config();
  BatchStream stream(f.train, tc.batch);
  Trainer trainer(model, stream, f.heldout, tc);
  CHECK_THROWS(trainer.resume_from(path));  // no training state inside

  ModelConfig other_cfg = tiny_model_config();
  other_cfg.hidden = 24;
  LanguageModel other(other_cfg, f.vocab, 7);
  BatchStream stream2(f.train, tc.batch);
  Trainer other_tr(other, stream2, f.heldout, tc);
  std::string tpath = "/tmp/lmkit_test_trainstate.ckpt";
  trainer.save_checkpoint(tpath);
  CHECK_THROWS(other_tr.resume_from(tpath));
}

TEST_CASE("copy_matching_parameters copies shapes that exist and skips the rest") {
  ParameterStore src, dst;
  Rng rng(1);
  src.add("shared", make_uniform(2, 3, 3, rng));
  src.add("src_only", make_uniform(1, 2, 2, rng));
  dst.add("shared", Tensor(2, 3));
  Parameter& fresh = dst.add("dst_only", make_uniform(2, 2, 2, rng));
  Tensor fresh_before = fresh.value;
  copy_matching_parameters(src, dst);
  for (long i = 0; i < 6; ++i) CHECK(dst.get("shared").value[i] == src.get("shared").value[i]);
  for (long i = 0; i < 4; ++i) CHECK(fresh.value[i] == fresh_before[i]);
}
