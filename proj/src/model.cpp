#include "lmkit/model.hpp"

#include <nlohmann/json.hpp>

namespace lmkit {

using nlohmann::json;

std::string to_string(EmbedKind k) { return k == EmbedKind::kTable ? "table" : "charcnn"; }
std::string to_string(HeadKind k) {
  switch (k) {
    case HeadKind::kFull: return "full";
    case HeadKind::kCNNSoftmax: return "cnn_softmax";
    case HeadKind::kCharLSTM: return "char_lstm";
  }
  return "full";
}

EmbedKind embed_kind_from(const std::string& s) {
  if (s == "table") return EmbedKind::kTable;
  if (s == "charcnn") return EmbedKind::kCharCNN;
  throw std::invalid_argument("unknown embed kind: " + s);
}

HeadKind head_kind_from(const std::string& s) {
  if (s == "full") return HeadKind::kFull;
  if (s == "cnn_softmax") return HeadKind::kCNNSoftmax;
  if (s == "char_lstm") return HeadKind::kCharLSTM;
  throw std::invalid_argument("unknown head kind: " + s);
}

std::string ModelConfig::to_json() const {
  json j;
  j["embed"] = lmkit::to_string(embed);
  j["head"] = lmkit::to_string(head);
  j["embed_dim"] = embed_dim;
  j["hidden"] = hidden;
  j["proj"] = proj;
  j["layers"] = layers;
  j["max_word_length"] = max_word_length;
  j["char_dim"] = char_dim;
  j["cnn_widths"] = cnn_widths;
  j["cnn_features"] = cnn_features;
  j["corr_dim"] = corr_dim;
  j["char_lstm_hidden"] = char_lstm_hidden;
  j["cnn_head_lr_scale"] = cnn_head_lr_scale;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& s) {
  json j = json::parse(s);
  ModelConfig c;
  c.embed = embed_kind_from(j.at("embed").get<std::string>());
  c.head = head_kind_from(j.at("head").get<std::string>());
  c.embed_dim = j.at("embed_dim").get<long>();
  c.hidden = j.at("hidden").get<long>();
  c.proj = j.at("proj").get<long>();
  c.layers = j.at("layers").get<long>();
  c.max_word_length = j.at("max_word_length").get<long>();
  c.char_dim = j.at("char_dim").get<long>();
  c.cnn_widths = j.at("cnn_widths").get<std::vector<long>>();
  c.cnn_features = j.at("cnn_features").get<std::vector<long>>();
  c.corr_dim = j.at("corr_dim").get<long>();
  c.char_lstm_hidden = j.at("char_lstm_hidden").get<long>();
  c.cnn_head_lr_scale = j.at("cnn_head_lr_scale").get<double>();
  return c;
}

CharCNNConfig ModelConfig::input_cnn_config() const {
  CharCNNConfig c;
  c.char_dim = char_dim;
  c.widths = cnn_widths;
  c.features = cnn_features;
  c.out_dim = embed_dim;
  return c;
}

CharCNNConfig ModelConfig::head_cnn_config() const {
  CharCNNConfig c = input_cnn_config();
  c.out_dim = proj;  // logits are inner products with the projected state
  return c;
}

LanguageModel::LanguageModel(ModelConfig cfg, const Vocabulary& vocab, uint64_t init_seed)
    : cfg_(std::move(cfg)), vocab_(&vocab), codec_(cfg_.max_word_length) {
  build(init_seed, /*fresh=*/true);
}

LanguageModel::LanguageModel(ModelConfig cfg, const Vocabulary& vocab, ParameterStore&& params)
    : cfg_(std::move(cfg)), vocab_(&vocab), codec_(cfg_.max_word_length),
      params_(std::move(params)) {
  build(0, /*fresh=*/false);
}

void LanguageModel::build(uint64_t init_seed, bool fresh) {
  Rng rng(init_seed);
  long v = vocab_->size();
  if (cfg_.embed == EmbedKind::kTable) {
    if (fresh)
      table_.emplace(params_, "input.table", v, cfg_.embed_dim, rng);
    else
      table_.emplace(params_, "input.table", v, cfg_.embed_dim);
  } else {
    if (fresh)
      in_cnn_.emplace(params_, "input.cnn", cfg_.input_cnn_config(), codec_, rng);
    else
      in_cnn_.emplace(params_, "input.cnn", cfg_.input_cnn_config(), codec_);
  }
  if (fresh)
    stack_.emplace(params_, "lstm", cfg_.embed_dim, cfg_.hidden, cfg_.proj, cfg_.layers, rng);
  else
    stack_.emplace(params_, "lstm", cfg_.embed_dim, cfg_.hidden, cfg_.proj, cfg_.layers);
  if (fresh)
    full_head_.emplace(params_, "head.full", v, cfg_.proj, rng);
  else
    full_head_.emplace(params_, "head.full", v, cfg_.proj);
  if (cfg_.head == HeadKind::kCNNSoftmax) {
    if (fresh)
      cnn_head_.emplace(params_, "head.cnn", cfg_.head_cnn_config(), codec_, *vocab_,
                        cfg_.corr_dim, rng, cfg_.cnn_head_lr_scale);
    else
      cnn_head_.emplace(params_, "head.cnn", cfg_.head_cnn_config(), codec_, *vocab_,
                        cfg_.corr_dim);
  }
  if (cfg_.head == HeadKind::kCharLSTM) {
    if (fresh)
      char_head_.emplace(params_, "head.char", cfg_.proj, cfg_.char_dim, cfg_.char_lstm_hidden,
                         codec_, rng);
    else
      char_head_.emplace(params_, "head.char", cfg_.proj, cfg_.char_dim, cfg_.char_lstm_hidden,
                         codec_);
  }
  long L = codec_.max_word_length;
  vocab_codes_.reserve(static_cast<size_t>(v * L));
  for (WordId w = 0; w < v; ++w) {
    auto c = codec_.encode(vocab_->word(w));
    vocab_codes_.insert(vocab_codes_.end(), c.begin(), c.end());
  }
}

long LanguageModel::input_param_count() const {
  return table_ ? table_->param_count() : in_cnn_->param_count();
}

std::vector<LSTMState> LanguageModel::zero_state(long batch) const {
  return stack_->zero_state(batch);
}

Value LanguageModel::embed_inputs(Graph& g, const std::vector<WordId>& ids) const {
  if (table_) return table_->embed(g, ids);
  long L = codec_.max_word_length;
  std::vector<long> codes;
  codes.reserve(ids.size() * static_cast<size_t>(L));
  for (WordId w : ids) {
    auto begin = vocab_codes_.begin() + w * L;
    codes.insert(codes.end(), begin, begin + L);
  }
  return in_cnn_->embed_codes(g, codes);
}

Value LanguageModel::forward_window(Graph& g, const std::vector<WordId>& inputs, long batch,
                                    long unroll, std::vector<LSTMState>& states,
                                    double dropout_p, bool training, Rng& rng) const {
  if (static_cast<long>(inputs.size()) != batch * unroll)
    throw std::invalid_argument("forward_window: inputs size != batch*unroll");
  auto vals = stack_->lift(g, states);
  std::vector<Value> hs;
  std::vector<WordId> slice(static_cast<size_t>(batch));
  for (long t = 0; t < unroll; ++t) {
    for (long b = 0; b < batch; ++b)
      slice[static_cast<size_t>(b)] = inputs[static_cast<size_t>(b * unroll + t)];
    Value x = embed_inputs(g, slice);
    hs.push_back(stack_->step(g, x, vals, dropout_p, training, rng));
  }
  states = stack_->detach(vals);
  return hs.size() == 1 ? hs[0] : g.concat_rows(hs);
}

std::vector<WordId> LanguageModel::reorder_targets(const std::vector<WordId>& targets, long batch,
                                                   long unroll) {
  std::vector<WordId> out(targets.size());
  for (long t = 0; t < unroll; ++t)
    for (long b = 0; b < batch; ++b)
      out[static_cast<size_t>(t * batch + b)] = targets[static_cast<size_t>(b * unroll + t)];
  return out;
}

Value LanguageModel::full_loss(Graph& g, Value h, const std::vector<WordId>& targets) const {
  Value lp = g.pick(full_head_->logprobs(g, h),
                    std::vector<long>(targets.begin(), targets.end()));
  return g.scale(g.sum_all(lp), -1.0 / static_cast<double>(targets.size()));
}

Value LanguageModel::sampled_loss(Graph& g, Value h, const std::vector<WordId>& targets,
                                  const std::vector<WordId>& samples,
                                  const std::vector<double>& proposal, bool nce) const {
  long n = static_cast<long>(targets.size());
  long k = static_cast<long>(samples.size());
  long k1 = k + 1;
  std::vector<WordId> ids;
  ids.reserve(static_cast<size_t>(n * k1));
  for (long i = 0; i < n; ++i) {
    ids.push_back(targets[static_cast<size_t>(i)]);
    ids.insert(ids.end(), samples.begin(), samples.end());
  }
  Value logits;
  if (cfg_.head == HeadKind::kCNNSoftmax) {
    // compute CNN embeddings once for the candidate union, then index locally
    std::vector<WordId> uniq;
    std::vector<long> pos(static_cast<size_t>(vocab_->size()), -1);
    std::vector<long> local(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
      WordId w = ids[i];
      if (pos[static_cast<size_t>(w)] < 0) {
        pos[static_cast<size_t>(w)] = static_cast<long>(uniq.size());
        uniq.push_back(w);
      }
      local[i] = pos[static_cast<size_t>(w)];
    }
    Value e = cnn_head_->embeddings_for(g, uniq);
    logits = g.gathered_scores(h, e, std::move(local), k1);
  } else {
    logits = candidate_logits(g, h, g.param(full_head_->table()), ids, k1);
  }
  return nce ? nce_loss(g, logits, ids, proposal, k) : is_loss(g, logits, ids, proposal);
}

Value LanguageModel::char_head_loss(Graph& g, Value h, const std::vector<WordId>& targets) const {
  if (!char_head_) throw std::logic_error("char_head_loss: model has no char head");
  long L = codec_.max_word_length;
  std::vector<long> codes;
  codes.reserve(targets.size() * static_cast<size_t>(L));
  for (WordId w : targets) {
    auto begin = vocab_codes_.begin() + w * L;
    codes.insert(codes.end(), begin, begin + L);
  }
  return char_head_->loss(g, h, codes);
}

void LanguageModel::freeze_all_except(const std::string& prefix) {
  for (auto& p : params_) p->frozen = p->name.rfind(prefix, 0) != 0;
}

Tensor LanguageModel::output_table() const {
  if (cfg_.head == HeadKind::kCNNSoftmax) return cnn_head_->precompute_table();
  return full_head_->table().value;
}

}  // namespace lmkit
