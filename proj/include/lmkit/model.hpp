#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lmkit/corpus.hpp"
#include "lmkit/embeddings.hpp"
#include "lmkit/heads.hpp"
#include "lmkit/recurrent.hpp"

namespace lmkit {

enum class EmbedKind { kTable, kCharCNN };
enum class HeadKind { kFull, kCNNSoftmax, kCharLSTM };

std::string to_string(EmbedKind k);
std::string to_string(HeadKind k);
EmbedKind embed_kind_from(const std::string& s);
HeadKind head_kind_from(const std::string& s);

struct ModelConfig {
  EmbedKind embed = EmbedKind::kTable;
  HeadKind head = HeadKind::kFull;
  long embed_dim = 128;  // LSTM input width (word table or char-CNN output)
  long hidden = 256;
  long proj = 128;
  long layers = 1;
  long max_word_length = 16;
  long char_dim = 16;
  std::vector<long> cnn_widths = {1, 2, 3, 4, 5};
  std::vector<long> cnn_features = {32, 32, 32, 16, 16};
  long corr_dim = 128;          // CNN softmax correction (0 disables)
  long char_lstm_hidden = 32;   // char prediction head
  double cnn_head_lr_scale = 0.1;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& s);

  CharCNNConfig input_cnn_config() const;
  CharCNNConfig head_cnn_config() const;
};

// A word-level LM: input embedding (table or char-CNN), LSTMP stack, and an
// output head. The full-softmax output matrix always exists; CNN-softmax and
// char-LSTM heads are optional replacements built on top of a frozen base.
class LanguageModel {
 public:
  LanguageModel(ModelConfig cfg, const Vocabulary& vocab, uint64_t init_seed);
  // rebuild from an architecture descriptor + existing parameter values
  LanguageModel(ModelConfig cfg, const Vocabulary& vocab, ParameterStore&& params);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return *vocab_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const CharCodec& codec() const { return codec_; }
  const LSTMStack& stack() const { return *stack_; }
  FullSoftmaxHead& full_head() { return *full_head_; }
  CNNSoftmaxHead* cnn_head() { return cnn_head_ ? &*cnn_head_ : nullptr; }
  const CNNSoftmaxHead* cnn_head() const { return cnn_head_ ? &*cnn_head_ : nullptr; }
  CharLSTMHead* char_head() { return char_head_ ? &*char_head_ : nullptr; }
  const CharLSTMHead* char_head() const { return char_head_ ? &*char_head_ : nullptr; }
  const CharCNNEmbedder* input_cnn() const { return in_cnn_ ? &*in_cnn_ : nullptr; }

  long input_param_count() const;

  std::vector<LSTMState> zero_state(long batch) const;

  // [B, embed_dim] for one time slice of ids
  Value embed_inputs(Graph& g, const std::vector<WordId>& ids) const;

  // Unrolls over inputs [B x T] (row-major, b*T+t) and returns the context
  // matrix H with rows ordered t*B+b. `states` is carried (detached) across
  // calls; gradients stop at the window boundary.
  Value forward_window(Graph& g, const std::vector<WordId>& inputs, long batch, long unroll,
                       std::vector<LSTMState>& states, double dropout_p, bool training,
                       Rng& rng) const;

  // reorders BatchStream targets ([B x T], b-major) to match forward_window
  // rows (t-major)
  static std::vector<WordId> reorder_targets(const std::vector<WordId>& targets, long batch,
                                             long unroll);

  // mean negative log-likelihood via the exact softmax
  Value full_loss(Graph& g, Value h, const std::vector<WordId>& targets) const;

  // sampled losses; `samples` shared across all rows, collisions kept
  Value sampled_loss(Graph& g, Value h, const std::vector<WordId>& targets,
                     const std::vector<WordId>& samples, const std::vector<double>& proposal,
                     bool nce) const;

  // char-head loss over the target words
  Value char_head_loss(Graph& g, Value h, const std::vector<WordId>& targets) const;

  // freeze everything except parameters whose name starts with `prefix`
  void freeze_all_except(const std::string& prefix);

  // output embedding table used for exact evaluation; for the CNN softmax the
  // rows are precomputed e_w
  Tensor output_table() const;

 private:
  void build(uint64_t init_seed, bool fresh);

  ModelConfig cfg_;
  const Vocabulary* vocab_;
  CharCodec codec_;
  ParameterStore params_;
  std::optional<WordEmbeddingTable> table_;
  std::optional<CharCNNEmbedder> in_cnn_;
  std::optional<LSTMStack> stack_;
  std::optional<FullSoftmaxHead> full_head_;
  std::optional<CNNSoftmaxHead> cnn_head_;
  std::optional<CharLSTMHead> char_head_;
  std::vector<long> vocab_codes_;  // for the char head
};

}  // namespace lmkit
