#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lmkit/gradsuite.hpp"
#include "lmkit/recipes.hpp"

using namespace lmkit;

namespace {

std::vector<SentenceIds> load_encoded(const std::string& path, const Vocabulary& vocab) {
  std::vector<SentenceIds> out;
  for (const auto& s : read_corpus_file(path)) out.push_back(vocab.encode(s));
  return out;
}

Vocabulary vocab_for(const std::string& vocab_path, const std::string& corpus_path,
                     long vocab_size) {
  if (!vocab_path.empty()) return Vocabulary::load(vocab_path);
  if (corpus_path.empty())
    throw std::runtime_error("need --vocab or a corpus to build a vocabulary from");
  return Vocabulary::build(read_corpus_file(corpus_path), vocab_size);
}

struct LoadedModel {
  Vocabulary vocab;
  std::unique_ptr<LanguageModel> model;
};

LoadedModel load_model(const std::string& ckpt_path, const std::string& vocab_path) {
  LoadedModel lm{Vocabulary::load(vocab_path), nullptr};
  LoadedCheckpoint ck = load_checkpoint(ckpt_path);
  lm.model = std::make_unique<LanguageModel>(model_from_checkpoint(ck, lm.vocab));
  return lm;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& corpus_path, const std::string& heldout_path,
              const std::string& vocab_path, long vocab_size, const std::string& out_dir,
              const std::string& resume_path, const std::string& warm_start_path) {
  KVMap kv = config_path.empty() ? KVMap{} : parse_kv_file(config_path);
  apply_overrides(kv, overrides);
  ModelConfig mc = model_config_from(kv);
  TrainConfig tc = train_config_from(kv);
  (void)resolved_config(kv);  // reject unknown keys before any compute

  Vocabulary vocab = vocab_for(vocab_path, corpus_path, vocab_size);
  std::vector<SentenceIds> train = load_encoded(corpus_path, vocab);
  std::vector<SentenceIds> heldout =
      heldout_path.empty() ? std::vector<SentenceIds>{} : load_encoded(heldout_path, vocab);
  if (heldout.empty()) throw std::runtime_error("train: --heldout is required for evaluation");

  std::filesystem::create_directories(out_dir + "/checkpoints");
  std::ofstream metrics(out_dir + "/metrics.log", std::ios::trunc);
  std::ofstream timing(out_dir + "/timing.log", std::ios::trunc);
  std::ofstream resolved(out_dir + "/config.resolved", std::ios::trunc);
  resolved << resolved_config(kv);
  resolved.close();
  vocab.save(out_dir + "/vocab.tsv");

  std::unique_ptr<LanguageModel> model;
  if (!warm_start_path.empty()) {
    LoadedCheckpoint base = load_checkpoint(warm_start_path);
    model = std::make_unique<LanguageModel>(mc, vocab, tc.seed * 2654435761ULL + 1);
    LanguageModel base_model = model_from_checkpoint(base, vocab);
    copy_matching_parameters(base_model.params(), model->params());
  } else {
    model = std::make_unique<LanguageModel>(mc, vocab, tc.seed * 2654435761ULL + 1);
  }

  BatchStream stream(train, tc.batch);
  Trainer trainer(*model, stream, heldout, tc);
  trainer.set_logs(&metrics, &timing);
  trainer.set_checkpoint_dir(out_dir + "/checkpoints");
  if (!resume_path.empty()) trainer.resume_from(resume_path);
  TrainResult r = trainer.run();
  std::printf("steps\t%ld\ntrain_loss\t%.6f\nheldout_ppl\t%.6f\nclip_fraction\t%.4f\n", r.steps,
              r.last_train_loss, r.last_heldout_ppl, r.clip_fraction);
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& vocab_path, const std::string& corpus,
             const std::string& dist) {
  LoadedModel lm = load_model(ckpt, vocab_path);
  auto sentences = load_encoded(corpus, lm.vocab);
  auto d = dist == "char" ? NeuralScorer::Dist::kCharMarginal : NeuralScorer::Dist::kTable;
  if (dist != "char" && dist != "table") throw std::runtime_error("eval: --dist must be table or char");
  NeuralScorer scorer(*lm.model, /*reset_per_sentence=*/true, d);
  EvalReport r = perplexity(scorer, sentences);
  std::printf("tokens\t%ld\nperplexity\t%.3f\n", r.tokens, r.perplexity);
  return 0;
}

int cmd_sample(const std::string& ckpt, const std::string& vocab_path, long count, long max_len,
               double temperature, uint64_t seed) {
  LoadedModel lm = load_model(ckpt, vocab_path);
  for (const auto& s : sample_sentences(*lm.model, count, max_len, temperature, seed))
    std::printf("%s\n", s.c_str());
  return 0;
}

int cmd_nn(const std::string& ckpt, const std::string& vocab_path, const std::string& query,
           long k) {
  LoadedModel lm = load_model(ckpt, vocab_path);
  const CharCNNEmbedder* emb = lm.model->input_cnn();
  if (!emb && lm.model->cnn_head()) emb = &lm.model->cnn_head()->cnn();
  if (!emb) throw std::runtime_error("nn: model has no character CNN");
  std::vector<std::string> candidates;
  for (long w = Vocabulary::kReserved; w < lm.vocab.size(); ++w)
    candidates.push_back(lm.vocab.word(w));
  for (const auto& n : nearest_neighbors(*emb, query, k, candidates))
    std::printf("%s\t%.6f\n", n.word.c_str(), n.similarity);
  return 0;
}

int cmd_buckets(const std::string& ckpt, const std::string& vocab_path,
                const std::string& train_path, const std::string& heldout_path, long order,
                long buckets) {
  LoadedModel lm = load_model(ckpt, vocab_path);
  auto train = load_encoded(train_path, lm.vocab);
  auto heldout = load_encoded(heldout_path, lm.vocab);
  KNModel kn = KNModel::train(train, order, lm.vocab.size());

  std::vector<double> lp_lstm, lp_kn;
  std::vector<WordId> tgt, tgt2;
  NeuralScorer ns(*lm.model, /*reset_per_sentence=*/true);
  score_corpus(ns, heldout, lp_lstm, tgt);
  KNScorer ks(kn);
  score_corpus(ks, heldout, lp_kn, tgt2);

  std::vector<long> freq(static_cast<size_t>(lm.vocab.size()));
  for (long w = 0; w < lm.vocab.size(); ++w) freq[static_cast<size_t>(w)] = lm.vocab.count(w);
  std::printf("lstm_ppl\t%.6f\nkn_ppl\t%.6f\n\n", report_from(lp_lstm).perplexity,
              report_from(lp_kn).perplexity);
  std::printf("%s", bucket_table(bucket_compare(lp_lstm, lp_kn, tgt, freq, buckets)).c_str());
  return 0;
}

int cmd_ensemble(const std::vector<std::string>& ckpts, const std::string& vocab_path,
                 const std::string& heldout_path, bool with_kn, const std::string& train_path,
                 long order, const std::string& cache_out) {
  Vocabulary vocab = Vocabulary::load(vocab_path);
  auto heldout = load_encoded(heldout_path, vocab);

  std::vector<std::unique_ptr<LanguageModel>> models;
  std::vector<std::unique_ptr<Scorer>> scorers;
  std::vector<Scorer*> members;
  for (const auto& p : ckpts) {
    LoadedCheckpoint ck = load_checkpoint(p);
    models.push_back(std::make_unique<LanguageModel>(model_from_checkpoint(ck, vocab)));
    scorers.push_back(std::make_unique<NeuralScorer>(*models.back(), true));
    members.push_back(scorers.back().get());
  }
  std::unique_ptr<KNModel> kn;
  if (with_kn) {
    if (train_path.empty()) throw std::runtime_error("ensemble: --with-kn needs --train");
    kn = std::make_unique<KNModel>(KNModel::train(load_encoded(train_path, vocab), order,
                                                  vocab.size()));
    scorers.push_back(std::make_unique<KNScorer>(*kn));
    members.push_back(scorers.back().get());
  }
  if (members.size() < 2) throw std::runtime_error("ensemble: need at least 2 members");

  ProbCache cache = ProbCache::build(members, heldout);
  if (!cache_out.empty()) cache.save(cache_out);
  std::vector<double> equal(members.size(), 1.0 / static_cast<double>(members.size()));
  EMTrace trace = optimize_weights(cache);
  std::printf("member\tweight\n");
  for (size_t i = 0; i < trace.weights.size(); ++i)
    std::printf("%zu\t%.6f\n", i, trace.weights[i]);
  std::printf("\nequal_weight_ppl\t%.6f\noptimized_ppl\t%.6f\nem_iterations\t%zu\n",
              mixture_perplexity(cache, equal), mixture_perplexity(cache, trace.weights),
              trace.loglik_per_iter.size() - 1);
  return 0;
}

int cmd_gradcheck() {
  auto cases = run_gradient_suite();
  for (const auto& c : cases) std::printf("%s\t%.3e\n", c.name.c_str(), c.max_rel_err);
  double mx = max_suite_error(cases);
  std::printf("max\t%.3e\n", mx);
  return mx < 1e-4 ? 0 : 1;
}

int cmd_recipe(const std::string& name, const std::string& out_dir, double scale) {
  RecipeOutcome r = run_recipe(name, out_dir, scale);
  std::printf("%s", r.report.c_str());
  std::printf("\nresult\t%s\n", r.pass ? "pass" : "fail");
  return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"word-level language modeling toolkit"};
  app.require_subcommand(1);
  long workers = 1;
  app.add_option("--workers", workers, "worker count (only 1 is supported)");

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string config, corpus, heldout, vocab_path, out_dir = "out", resume, warm;
  std::vector<std::string> sets;
  long vocab_size = 10000;
  train->add_option("--config", config, "key=value config file");
  train->add_option("--set", sets, "config override key=value (repeatable)");
  train->add_option("--corpus", corpus, "training text, one sentence per line")->required();
  train->add_option("--heldout", heldout, "held-out text")->required();
  train->add_option("--vocab", vocab_path, "existing vocabulary file");
  train->add_option("--vocab-size", vocab_size, "vocabulary cap when building from the corpus");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--resume", resume, "training checkpoint to resume from");
  train->add_option("--warm-start", warm, "model checkpoint to copy matching parameters from");

  // eval
  auto* eval = app.add_subcommand("eval", "held-out perplexity");
  std::string e_ckpt, e_vocab, e_corpus, e_dist = "table";
  eval->add_option("--checkpoint", e_ckpt)->required();
  eval->add_option("--vocab", e_vocab)->required();
  eval->add_option("--corpus", e_corpus)->required();
  eval->add_option("--dist", e_dist, "table or char");

  // sample
  auto* sample = app.add_subcommand("sample", "generate sentences");
  std::string s_ckpt, s_vocab;
  long s_count = 5, s_max_len = 50;
  double s_temp = 1.0;
  uint64_t s_seed = 1;
  sample->add_option("--checkpoint", s_ckpt)->required();
  sample->add_option("--vocab", s_vocab)->required();
  sample->add_option("--count", s_count);
  sample->add_option("--max-len", s_max_len);
  sample->add_option("--temperature", s_temp);
  sample->add_option("--seed", s_seed);

  // nn
  auto* nn = app.add_subcommand("nn", "nearest neighbors in char-CNN embedding space");
  std::string n_ckpt, n_vocab, n_query;
  long n_k = 10;
  nn->add_option("--checkpoint", n_ckpt)->required();
  nn->add_option("--vocab", n_vocab)->required();
  nn->add_option("--query", n_query)->required();
  nn->add_option("--k", n_k);

  // buckets
  auto* buckets = app.add_subcommand("buckets", "per-frequency-bucket comparison vs KN");
  std::string b_ckpt, b_vocab, b_train, b_heldout;
  long b_order = 5, b_buckets = 25;
  buckets->add_option("--checkpoint", b_ckpt)->required();
  buckets->add_option("--vocab", b_vocab)->required();
  buckets->add_option("--train", b_train)->required();
  buckets->add_option("--heldout", b_heldout)->required();
  buckets->add_option("--order", b_order);
  buckets->add_option("--buckets", b_buckets);

  // ensemble
  auto* ensemble = app.add_subcommand("ensemble", "EM-weighted linear interpolation");
  std::vector<std::string> m_ckpts;
  std::string m_vocab, m_heldout, m_train, m_cache;
  bool m_with_kn = false;
  long m_order = 5;
  ensemble->add_option("--checkpoint", m_ckpts, "member checkpoint (repeatable)");
  ensemble->add_option("--vocab", m_vocab)->required();
  ensemble->add_option("--heldout", m_heldout)->required();
  ensemble->add_flag("--with-kn", m_with_kn, "add a KN member trained on --train");
  ensemble->add_option("--train", m_train);
  ensemble->add_option("--order", m_order);
  ensemble->add_option("--cache-out", m_cache, "write the probability cache here");

  // gradcheck
  app.add_subcommand("gradcheck", "finite-difference checks over registered architectures");

  // recipe run <name>
  auto* recipe = app.add_subcommand("recipe", "run a named experiment");
  auto* recipe_run = recipe->add_subcommand("run", "run a recipe end to end");
  std::string r_name, r_out = "out";
  double r_scale = 1.0;
  std::string names;
  for (const auto& n : recipe_names()) names += (names.empty() ? "" : ", ") + n;
  recipe_run->add_option("name", r_name, "one of: " + names)->required();
  recipe_run->add_option("--out", r_out);
  recipe_run->add_option("--scale", r_scale, "shrink corpus and step counts");
  recipe->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (workers != 1) throw std::runtime_error("only --workers 1 is supported");
    if (train->parsed())
      return cmd_train(config, sets, corpus, heldout, vocab_path, vocab_size, out_dir, resume,
                       warm);
    if (eval->parsed()) return cmd_eval(e_ckpt, e_vocab, e_corpus, e_dist);
    if (sample->parsed()) return cmd_sample(s_ckpt, s_vocab, s_count, s_max_len, s_temp, s_seed);
    if (nn->parsed()) return cmd_nn(n_ckpt, n_vocab, n_query, n_k);
    if (buckets->parsed())
      return cmd_buckets(b_ckpt, b_vocab, b_train, b_heldout, b_order, b_buckets);
    if (ensemble->parsed())
      return cmd_ensemble(m_ckpts, m_vocab, m_heldout, m_with_kn, m_train, m_order, m_cache);
    if (app.get_subcommand("gradcheck")->parsed()) return cmd_gradcheck();
    if (recipe->parsed()) return cmd_recipe(r_name, r_out, r_scale);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
