#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lmkit/checkpoint.hpp"
#include "lmkit/corpus.hpp"
#include "lmkit/model.hpp"

namespace lmkit {

// Plain-text key=value configuration ('#' comments, blank lines ignored).
using KVMap = std::map<std::string, std::string>;

KVMap parse_kv_file(const std::string& path);
KVMap parse_kv_lines(const std::vector<std::string>& lines);
// each override is "key=value"; later entries win
void apply_overrides(KVMap& kv, const std::vector<std::string>& overrides);
std::string dump_kv(const KVMap& kv);  // sorted, one key=value per line

enum class LossKind { kFull, kIS, kNCE, kChar };
std::string to_string(LossKind k);
LossKind loss_kind_from(const std::string& s);

struct TrainConfig {
  LossKind loss = LossKind::kIS;
  double lr = 0.2;
  long unroll = 20;
  long batch = 32;
  double clip = 1.0;  // global grad norm bound; 0 disables
  double dropout = 0.0;
  long k = 256;  // negative samples per step
  long max_steps = 1000;
  uint64_t seed = 1;
  long eval_every = 100;      // 0 = final eval only
  long checkpoint_every = 0;  // 0 = final checkpoint only
  long patience = 0;          // stop after N evals without heldout improvement; 0 disables
  std::string freeze_except;  // freeze all parameters outside this prefix

  void validate() const;
};

// Reads/writes the subset of keys each config owns; unknown keys in the map
// are left for the other consumer, and resolved_config() round-trips both.
TrainConfig train_config_from(const KVMap& kv);
ModelConfig model_config_from(const KVMap& kv);
KVMap to_kv(const TrainConfig& cfg);
KVMap to_kv(const ModelConfig& cfg);
// full defaults+overrides picture; throws on keys neither config understands
std::string resolved_config(const KVMap& kv);

struct TrainResult {
  long steps = 0;              // total steps taken (cumulative over resumes)
  double last_train_loss = 0;  // loss at the final step
  double last_heldout_ppl = 0;
  double clip_fraction = 0;  // fraction of steps where clipping engaged
};

class Trainer {
 public:
  Trainer(LanguageModel& model, BatchStream& stream, const std::vector<SentenceIds>& heldout,
          TrainConfig cfg);

  // metrics gets one "step\ttrain_loss\theldout_ppl" line per eval
  // (deterministic); timing gets "step\twall_seconds" on the side.
  void set_logs(std::ostream* metrics, std::ostream* timing) {
    metrics_ = metrics;
    timing_ = timing;
  }
  // enables periodic checkpoints plus the abort dump on a non-finite loss
  void set_checkpoint_dir(const std::string& dir) { ckpt_dir_ = dir; }

  TrainResult run();

  long step() const { return step_; }
  double heldout_perplexity() const;

  void save_checkpoint(const std::string& path) const;
  // restores step counter, PRNG, stream cursors, carried LSTM states, and all
  // parameters; the model architecture and vocabulary must already match
  void resume_from(const std::string& path);

 private:
  void train_step();
  void eval_and_log();
  std::string dump_batch() const;

  LanguageModel* model_;
  BatchStream* stream_;
  const std::vector<SentenceIds>* heldout_;
  TrainConfig cfg_;
  Rng rng_;
  std::vector<double> proposal_;
  std::vector<LSTMState> states_;
  std::vector<WordId> inputs_, targets_;
  long step_ = 0;
  long clipped_steps_ = 0;
  double last_loss_ = 0.0;
  double last_ppl_ = 0.0;
  double best_ppl_ = 0.0;
  long evals_since_best_ = 0;
  bool stop_ = false;
  std::ostream* metrics_ = nullptr;
  std::ostream* timing_ = nullptr;
  std::string ckpt_dir_;
  double t_start_ = 0.0;
};

// Loaded checkpoint, before the model is rebuilt around a vocabulary.
struct LoadedCheckpoint {
  SectionReader reader;
  ModelConfig model_cfg;
  uint64_t vocab_hash = 0;
  long step = 0;  // 0 when the file is model-only
};

void save_model_checkpoint(const std::string& path, const LanguageModel& model);
LoadedCheckpoint load_checkpoint(const std::string& path);
// rebuilds the model; throws if the vocabulary hash disagrees
LanguageModel model_from_checkpoint(const LoadedCheckpoint& ck, const Vocabulary& vocab);

}  // namespace lmkit
