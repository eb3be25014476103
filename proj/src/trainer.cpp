#include "lmkit/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "lmkit/eval.hpp"
#include "lmkit/optim.hpp"

namespace lmkit {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// shortest round-trip decimal form, so config dumps and metrics are
// deterministic and re-parse to the same bits
std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

long parse_long(const std::string& key, const std::string& s) {
  size_t pos = 0;
  long v;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + s + "'");
  }
  if (pos != s.size()) throw std::invalid_argument("config: bad integer for " + key + ": '" + s + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& s) {
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + s + "'");
  }
  if (pos != s.size()) throw std::invalid_argument("config: bad number for " + key + ": '" + s + "'");
  return v;
}

std::vector<long> parse_long_list(const std::string& key, const std::string& s) {
  std::vector<long> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_long(key, trim(item)));
  return out;
}

std::string fmt_long_list(const std::vector<long>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

KVMap parse_kv_lines(const std::vector<std::string>& lines) {
  KVMap kv;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(i + 1) +
                                  " is not key=value: '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw std::invalid_argument("config: empty key on line " + std::to_string(i + 1));
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KVMap parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return parse_kv_lines(lines);
}

void apply_overrides(KVMap& kv, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    size_t eq = o.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("override is not key=value: '" + o + "'");
    kv[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
  }
}

std::string dump_kv(const KVMap& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::kFull: return "full";
    case LossKind::kIS: return "is";
    case LossKind::kNCE: return "nce";
    case LossKind::kChar: return "char";
  }
  return "full";
}

LossKind loss_kind_from(const std::string& s) {
  if (s == "full") return LossKind::kFull;
  if (s == "is") return LossKind::kIS;
  if (s == "nce") return LossKind::kNCE;
  if (s == "char") return LossKind::kChar;
  throw std::invalid_argument("unknown loss kind: " + s);
}

void TrainConfig::validate() const {
  if (lr < 0) throw std::invalid_argument("config: lr must be >= 0");
  if (unroll <= 0) throw std::invalid_argument("config: unroll must be positive");
  if (batch <= 0) throw std::invalid_argument("config: batch must be positive");
  if (clip < 0) throw std::invalid_argument("config: clip must be >= 0");
  if (dropout < 0 || dropout >= 1) throw std::invalid_argument("config: dropout must be in [0,1)");
  if (k <= 0) throw std::invalid_argument("config: k must be positive");
  if (max_steps < 0) throw std::invalid_argument("config: max_steps must be >= 0");
  if (eval_every < 0) throw std::invalid_argument("config: eval_every must be >= 0");
  if (checkpoint_every < 0) throw std::invalid_argument("config: checkpoint_every must be >= 0");
  if (patience < 0) throw std::invalid_argument("config: patience must be >= 0");
}

TrainConfig train_config_from(const KVMap& kv) {
  TrainConfig c;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* s = get("loss")) c.loss = loss_kind_from(*s);
  if (auto* s = get("lr")) c.lr = parse_double("lr", *s);
  if (auto* s = get("unroll")) c.unroll = parse_long("unroll", *s);
  if (auto* s = get("batch")) c.batch = parse_long("batch", *s);
  if (auto* s = get("clip")) c.clip = parse_double("clip", *s);
  if (auto* s = get("dropout")) c.dropout = parse_double("dropout", *s);
  if (auto* s = get("k")) c.k = parse_long("k", *s);
  if (auto* s = get("max_steps")) c.max_steps = parse_long("max_steps", *s);
  if (auto* s = get("seed")) c.seed = static_cast<uint64_t>(parse_long("seed", *s));
  if (auto* s = get("eval_every")) c.eval_every = parse_long("eval_every", *s);
  if (auto* s = get("checkpoint_every")) c.checkpoint_every = parse_long("checkpoint_every", *s);
  if (auto* s = get("patience")) c.patience = parse_long("patience", *s);
  if (auto* s = get("freeze_except")) c.freeze_except = *s;
  c.validate();
  return c;
}

ModelConfig model_config_from(const KVMap& kv) {
  ModelConfig c;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* s = get("embed")) c.embed = embed_kind_from(*s);
  if (auto* s = get("head")) c.head = head_kind_from(*s);
  if (auto* s = get("embed_dim")) c.embed_dim = parse_long("embed_dim", *s);
  if (auto* s = get("hidden")) c.hidden = parse_long("hidden", *s);
  if (auto* s = get("proj")) c.proj = parse_long("proj", *s);
  if (auto* s = get("layers")) c.layers = parse_long("layers", *s);
  if (auto* s = get("max_word_length")) c.max_word_length = parse_long("max_word_length", *s);
  if (auto* s = get("char_dim")) c.char_dim = parse_long("char_dim", *s);
  if (auto* s = get("cnn_widths")) c.cnn_widths = parse_long_list("cnn_widths", *s);
  if (auto* s = get("cnn_features")) c.cnn_features = parse_long_list("cnn_features", *s);
  if (auto* s = get("corr_dim")) c.corr_dim = parse_long("corr_dim", *s);
  if (auto* s = get("char_lstm_hidden")) c.char_lstm_hidden = parse_long("char_lstm_hidden", *s);
  if (auto* s = get("cnn_head_lr_scale")) c.cnn_head_lr_scale = parse_double("cnn_head_lr_scale", *s);
  return c;
}

KVMap to_kv(const TrainConfig& c) {
  KVMap kv;
  kv["loss"] = to_string(c.loss);
  kv["lr"] = fmt(c.lr);
  kv["unroll"] = std::to_string(c.unroll);
  kv["batch"] = std::to_string(c.batch);
  kv["clip"] = fmt(c.clip);
  kv["dropout"] = fmt(c.dropout);
  kv["k"] = std::to_string(c.k);
  kv["max_steps"] = std::to_string(c.max_steps);
  kv["seed"] = std::to_string(c.seed);
  kv["eval_every"] = std::to_string(c.eval_every);
  kv["checkpoint_every"] = std::to_string(c.checkpoint_every);
  kv["patience"] = std::to_string(c.patience);
  kv["freeze_except"] = c.freeze_except;
  return kv;
}

KVMap to_kv(const ModelConfig& c) {
  KVMap kv;
  kv["embed"] = to_string(c.embed);
  kv["head"] = to_string(c.head);
  kv["embed_dim"] = std::to_string(c.embed_dim);
  kv["hidden"] = std::to_string(c.hidden);
  kv["proj"] = std::to_string(c.proj);
  kv["layers"] = std::to_string(c.layers);
  kv["max_word_length"] = std::to_string(c.max_word_length);
  kv["char_dim"] = std::to_string(c.char_dim);
  kv["cnn_widths"] = fmt_long_list(c.cnn_widths);
  kv["cnn_features"] = fmt_long_list(c.cnn_features);
  kv["corr_dim"] = std::to_string(c.corr_dim);
  kv["char_lstm_hidden"] = std::to_string(c.char_lstm_hidden);
  kv["cnn_head_lr_scale"] = fmt(c.cnn_head_lr_scale);
  return kv;
}

std::string resolved_config(const KVMap& kv) {
  KVMap merged = to_kv(model_config_from(kv));
  for (const auto& [k, v] : to_kv(train_config_from(kv))) merged[k] = v;
  for (const auto& [k, v] : kv)
    if (!merged.count(k)) throw std::invalid_argument("config: unknown key '" + k + "'");
  return dump_kv(merged);
}

Trainer::Trainer(LanguageModel& model, BatchStream& stream,
                 const std::vector<SentenceIds>& heldout, TrainConfig cfg)
    : model_(&model), stream_(&stream), heldout_(&heldout), cfg_(std::move(cfg)),
      rng_(cfg_.seed) {
  cfg_.validate();
  if (stream.batch_size() != cfg_.batch)
    throw std::invalid_argument("trainer: stream batch size " +
                                std::to_string(stream.batch_size()) + " != config batch " +
                                std::to_string(cfg_.batch));
  if (cfg_.loss == LossKind::kChar && !model.char_head())
    throw std::invalid_argument("trainer: char loss requires a char-LSTM head");
  if (cfg_.loss == LossKind::kIS || cfg_.loss == LossKind::kNCE)
    proposal_ = model.vocab().unigram();
  if (!cfg_.freeze_except.empty()) model.freeze_all_except(cfg_.freeze_except);
  states_ = model.zero_state(cfg_.batch);
  best_ppl_ = std::numeric_limits<double>::infinity();
}

void Trainer::train_step() {
  stream_->next_batch(cfg_.unroll, inputs_, targets_);
  Graph g;
  Value h = model_->forward_window(g, inputs_, cfg_.batch, cfg_.unroll, states_, cfg_.dropout,
                                   /*training=*/true, rng_);
  std::vector<WordId> tg = LanguageModel::reorder_targets(targets_, cfg_.batch, cfg_.unroll);
  Value loss;
  switch (cfg_.loss) {
    case LossKind::kFull:
      loss = model_->full_loss(g, h, tg);
      break;
    case LossKind::kIS:
    case LossKind::kNCE: {
      SampledLossConfig sc{cfg_.k, proposal_, /*shared_across_batch=*/true};
      std::vector<WordId> samples = draw_samples(sc, rng_);
      loss = model_->sampled_loss(g, h, tg, samples, proposal_, cfg_.loss == LossKind::kNCE);
      break;
    }
    case LossKind::kChar:
      loss = model_->char_head_loss(g, h, tg);
      break;
  }
  double value = loss.scalar();
  if (!std::isfinite(value)) {
    if (!ckpt_dir_.empty()) {
      save_checkpoint(ckpt_dir_ + "/nan_abort.ckpt");
      std::ofstream dump(ckpt_dir_ + "/nan_batch.txt");
      dump << dump_batch();
    }
    throw std::runtime_error("trainer: non-finite loss at step " + std::to_string(step_ + 1) +
                             (ckpt_dir_.empty() ? "" : " (checkpoint and batch dumped to " +
                                                           ckpt_dir_ + ")"));
  }
  g.backward(loss);
  if (cfg_.clip > 0 && clip_global_norm(model_->params(), cfg_.clip) < 1.0) ++clipped_steps_;
  adagrad_update(model_->params(), cfg_.lr);
  ++step_;
  last_loss_ = value;
}

std::string Trainer::dump_batch() const {
  std::ostringstream out;
  out << "step\t" << step_ + 1 << "\n";
  out << "inputs";
  for (WordId w : inputs_) out << '\t' << w;
  out << "\ntargets";
  for (WordId w : targets_) out << '\t' << w;
  out << '\n';
  return out.str();
}

double Trainer::heldout_perplexity() const {
  auto dist =
      cfg_.loss == LossKind::kChar ? NeuralScorer::Dist::kCharMarginal : NeuralScorer::Dist::kTable;
  NeuralScorer scorer(*model_, /*reset_per_sentence=*/true, dist);
  return perplexity(scorer, *heldout_).perplexity;
}

void Trainer::eval_and_log() {
  last_ppl_ = heldout_perplexity();
  if (metrics_) {
    *metrics_ << step_ << '\t' << fmt(last_loss_) << '\t' << fmt(last_ppl_) << '\n';
    metrics_->flush();
  }
  if (timing_) {
    *timing_ << step_ << '\t' << std::fixed << std::setprecision(3)
             << now_seconds() - t_start_ << '\n';
    timing_->flush();
  }
  if (last_ppl_ < best_ppl_) {
    best_ppl_ = last_ppl_;
    evals_since_best_ = 0;
  } else if (cfg_.patience > 0 && ++evals_since_best_ >= cfg_.patience) {
    stop_ = true;
  }
}

TrainResult Trainer::run() {
  t_start_ = now_seconds();
  long steps_this_run = 0;
  clipped_steps_ = 0;
  bool evaluated = false;
  while (step_ < cfg_.max_steps && !stop_) {
    train_step();
    ++steps_this_run;
    evaluated = false;
    if (cfg_.eval_every > 0 && step_ % cfg_.eval_every == 0) {
      eval_and_log();
      evaluated = true;
    }
    if (!ckpt_dir_.empty() && cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0)
      save_checkpoint(ckpt_dir_ + "/step_" + std::to_string(step_) + ".ckpt");
  }
  if (!evaluated) eval_and_log();
  if (!ckpt_dir_.empty()) save_checkpoint(ckpt_dir_ + "/final.ckpt");
  TrainResult r;
  r.steps = step_;
  r.last_train_loss = last_loss_;
  r.last_heldout_ppl = last_ppl_;
  r.clip_fraction =
      steps_this_run ? static_cast<double>(clipped_steps_) / static_cast<double>(steps_this_run)
                     : 0.0;
  return r;
}

void Trainer::save_checkpoint(const std::string& path) const {
  SectionWriter w;
  w.add_string("arch", model_->config().to_json());
  w.add_u64("vocab.hash", model_->vocab().hash());
  add_parameters(w, model_->params());
  w.add_u64("train.step", static_cast<uint64_t>(step_));
  w.add_u64("rng.seed", rng_.seed());
  w.add_u64("rng.counter", rng_.counter());
  std::vector<long> cur = stream_->cursors();
  w.add_doubles("train.cursors", std::vector<double>(cur.begin(), cur.end()));
  for (size_t l = 0; l < states_.size(); ++l) {
    w.add_tensor("train.state." + std::to_string(l) + ".c", states_[l].c);
    w.add_tensor("train.state." + std::to_string(l) + ".h", states_[l].h);
  }
  w.write(path);
}

void Trainer::resume_from(const std::string& path) {
  SectionReader r(path);
  if (!r.has("train.step"))
    throw std::runtime_error("resume: " + path + " is not a training checkpoint");
  if (r.get_u64("vocab.hash") != model_->vocab().hash())
    throw std::runtime_error("resume: vocabulary hash mismatch in " + path);
  if (r.get_string("arch") != model_->config().to_json())
    throw std::runtime_error("resume: model architecture mismatch in " + path);
  load_parameters(r, model_->params());
  step_ = static_cast<long>(r.get_u64("train.step"));
  rng_.restore(r.get_u64("rng.seed"), r.get_u64("rng.counter"));
  std::vector<double> cur = r.get_doubles("train.cursors");
  stream_->set_cursors(std::vector<long>(cur.begin(), cur.end()));
  for (size_t l = 0; l < states_.size(); ++l) {
    states_[l].c = r.get_tensor("train.state." + std::to_string(l) + ".c");
    states_[l].h = r.get_tensor("train.state." + std::to_string(l) + ".h");
  }
}

void save_model_checkpoint(const std::string& path, const LanguageModel& model) {
  SectionWriter w;
  w.add_string("arch", model.config().to_json());
  w.add_u64("vocab.hash", model.vocab().hash());
  add_parameters(w, model.params());
  w.write(path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  LoadedCheckpoint ck{SectionReader(path), ModelConfig{}, 0, 0};
  ck.model_cfg = ModelConfig::from_json(ck.reader.get_string("arch"));
  ck.vocab_hash = ck.reader.get_u64("vocab.hash");
  if (ck.reader.has("train.step")) ck.step = static_cast<long>(ck.reader.get_u64("train.step"));
  return ck;
}

LanguageModel model_from_checkpoint(const LoadedCheckpoint& ck, const Vocabulary& vocab) {
  if (ck.vocab_hash != vocab.hash())
    throw std::runtime_error("checkpoint: vocabulary hash mismatch");
  LanguageModel model(ck.model_cfg, vocab, /*init_seed=*/0);
  load_parameters(ck.reader, model.params());
  return model;
}

}  // namespace lmkit
