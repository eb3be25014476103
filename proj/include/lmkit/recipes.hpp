#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lmkit/ensemble.hpp"
#include "lmkit/eval.hpp"
#include "lmkit/model.hpp"
#include "lmkit/ngram.hpp"
#include "lmkit/synth.hpp"
#include "lmkit/trainer.hpp"

namespace lmkit {

struct Curve {
  std::vector<long> steps;
  std::vector<double> ppl;
  double final_ppl() const;
};

// The shared desk-scale experiment corpus; `scale` shrinks the sentence count
// for smoke runs.
struct DeskCorpus {
  Vocabulary vocab;
  std::vector<SentenceIds> train;
  std::vector<SentenceIds> heldout;        // full holdout split
  std::vector<SentenceIds> heldout_small;  // periodic-eval subset
  std::vector<SentenceIds> heldout_tiny;   // subset for expensive char-head scoring
  std::vector<long> train_freq;            // per word id
};

DeskCorpus make_desk_corpus(double scale = 1.0, uint64_t seed = 2024);

struct LMRun {
  std::unique_ptr<LanguageModel> model;
  Curve curve;
  std::string metrics;  // raw metrics.log body
  TrainResult result;
};

// Trains one model from key=value overrides on top of the defaults. When
// out_dir is set, writes config.resolved, metrics.log, timing.log, and
// checkpoints/. warm_start copies every matching parameter before training.
LMRun train_lm(const Vocabulary& vocab, const std::vector<SentenceIds>& train,
               const std::vector<SentenceIds>& heldout, KVMap kv, const std::string& out_dir = "",
               const LanguageModel* warm_start = nullptr);

double table_ppl(const LanguageModel& model, const std::vector<SentenceIds>& sentences);

struct NceVsIsResult {
  LMRun is_run, nce_run;
  bool pass = false;
  std::string table;  // step \t is_ppl \t nce_ppl
};
NceVsIsResult recipe_nce_vs_is(const DeskCorpus& dc, const std::string& out_dir, double scale);

struct LstmVsKnResult {
  double lstm_ppl = 0, kn_ppl = 0;
  std::vector<BucketRow> buckets;
  long argmax_bucket = -1;
  bool pass = false;
  std::string table;
};
LstmVsKnResult recipe_lstm_vs_kn(const DeskCorpus& dc, const LanguageModel& lstm,
                                 const KNModel& kn, const std::string& out_dir);

struct ParityResult {
  double table_ppl = 0, cnn_ppl = 0;
  long table_params = 0, cnn_params = 0;
  bool pass = false;
  std::string table;
};
ParityResult recipe_charcnn_parity(const DeskCorpus& dc, const std::string& out_dir, double scale);

// one state pass: unnormalized and vocabulary-renormalized char-head scores
// over the same tokens; `pointwise_raised` is true when renormalization never
// lowered an in-vocabulary log-probability
void char_head_eval(const LanguageModel& model, const std::vector<SentenceIds>& sentences,
                    double& unnorm_ppl, double& marg_ppl, bool& pointwise_raised);

struct OrderingResult {
  double full_ppl = 0, cnn_corr_ppl = 0, cnn_plain_ppl = 0;
  double char_marg_ppl = 0, char_unnorm_ppl = 0;
  bool ordering_pass = false;  // full <= cnn+corr <= cnn <= char (marginalized)
  bool marginal_pass = false;  // renormalizing helps pointwise and on perplexity
  std::string table;
  LMRun char_run;  // exposed so callers can reuse the trained char head
};
OrderingResult recipe_softmax_ordering(const DeskCorpus& dc, const LanguageModel& base,
                                       const std::string& out_dir, double scale);

struct EnsembleResult {
  std::vector<double> weights;
  std::vector<double> loglik_trace;
  double equal_ppl = 0, opt_ppl = 0;
  bool pass = false;
  std::string table;
};
EnsembleResult recipe_ensemble(const DeskCorpus& dc, const LanguageModel& a,
                               const LanguageModel& b, const KNModel& kn,
                               const std::string& out_dir);

struct RecipeOutcome {
  bool pass = false;
  std::string report;
};

// names: nce-vs-is, lstm-vs-kn5, charcnn-parity, softmax-ordering, ensemble
RecipeOutcome run_recipe(const std::string& name, const std::string& out_dir, double scale = 1.0);
std::vector<std::string> recipe_names();

}  // namespace lmkit
