#pragma once

#include <string>
#include <vector>

#include "lmkit/corpus.hpp"
#include "lmkit/embeddings.hpp"
#include "lmkit/graph.hpp"
#include "lmkit/recurrent.hpp"

namespace lmkit {

// Output embedding matrix [V, d]; logits are inner products with the context.
class FullSoftmaxHead {
 public:
  FullSoftmaxHead(ParameterStore& params, const std::string& name, long vocab_size, long dim,
                  Rng& rng);
  FullSoftmaxHead(ParameterStore& params, const std::string& name, long vocab_size, long dim);

  long vocab_size() const { return vocab_size_; }
  long dim() const { return dim_; }
  Parameter& table() const { return *emb_; }

  Value logits(Graph& g, Value h) const;    // [N, V]
  Value logprobs(Graph& g, Value h) const;  // exact log_softmax rows

 private:
  long vocab_size_, dim_;
  Parameter* emb_;
};

// Negative-sampling configuration shared by the IS and NCE losses.
struct SampledLossConfig {
  long k = 256;                    // negative samples per step
  std::vector<double> proposal;    // p_n over ids, strictly positive, sums to 1
  bool shared_across_batch = true;
};

// Draws k ids with replacement from the proposal (shared across the batch).
std::vector<WordId> draw_samples(const SampledLossConfig& cfg, Rng& rng);

// Logit matrix for per-row candidate lists: ids has n*(k+1) entries, column 0
// of each row being the target; scores come from rows of the embedding value.
Value candidate_logits(Graph& g, Value h, Value emb, const std::vector<WordId>& ids, long k1);

// Multiclass sampled-softmax loss: cross entropy over logits shifted by
// -ln p_n(w), target in column 0. Mean over rows.
Value is_loss(Graph& g, Value logits, const std::vector<WordId>& ids,
              const std::vector<double>& proposal);

// Binary logistic loss against k noise samples: logits shifted by
// -ln(k p_n(w)); per-row loss is the positive term plus the k noise terms.
// Mean over rows.
Value nce_loss(Graph& g, Value logits, const std::vector<WordId>& ids,
               const std::vector<double>& proposal, long k);

// Output embeddings generated by a character CNN, plus an optional low-rank
// learned per-word correction: e_w = CNN(chars_w) + M corr_w.
class CNNSoftmaxHead {
 public:
  CNNSoftmaxHead(ParameterStore& params, const std::string& prefix, const CharCNNConfig& cnn_cfg,
                 const CharCodec& codec, const Vocabulary& vocab, long corr_dim, Rng& rng,
                 double lr_scale = 0.1);
  CNNSoftmaxHead(ParameterStore& params, const std::string& prefix, const CharCNNConfig& cnn_cfg,
                 const CharCodec& codec, const Vocabulary& vocab, long corr_dim);

  long corr_dim() const { return corr_dim_; }
  long proj_dim() const { return cnn_.out_dim(); }
  const CharCNNEmbedder& cnn() const { return cnn_; }
  long param_count() const;

  // effective output embeddings for the given ids, as a graph value [N, d]
  Value embeddings_for(Graph& g, const std::vector<WordId>& ids) const;

  // z_w = h . CNN(chars_w) + h . M corr_w, single context and word
  double logit(const Tensor& h, WordId w) const;

  // inference table of all e_w, equal bit-for-bit to the on-the-fly path
  Tensor precompute_table() const;

 private:
  void encode_vocab();

  CharCNNEmbedder cnn_;
  const Vocabulary* vocab_;
  long corr_dim_;
  Parameter* corr_ = nullptr;  // [V, corr_dim]
  Parameter* m_ = nullptr;     // [proj, corr_dim]
  std::vector<long> vocab_codes_;  // all vocab words, fixed width
};

// Small character-level LSTM conditioned on the word-level context vector;
// scores a word as the product of per-character probabilities, BOW primed and
// terminating at EOW.
class CharLSTMHead {
 public:
  CharLSTMHead(ParameterStore& params, const std::string& prefix, long ctx_dim, long char_dim,
               long hidden, const CharCodec& codec, Rng& rng);
  CharLSTMHead(ParameterStore& params, const std::string& prefix, long ctx_dim, long char_dim,
               long hidden, const CharCodec& codec);

  const CharCodec& codec() const { return codec_; }
  long ctx_dim() const { return ctx_dim_; }

  // ln p(word | h) for a batch: hctx [N, ctx_dim], codes N*max_word_length.
  // Output [N, 1], teacher-forced through EOW.
  Value word_logprobs(Graph& g, Value hctx, const std::vector<long>& codes) const;

  // training loss: -mean ln p over the batch
  Value loss(Graph& g, Value hctx, const std::vector<long>& codes) const;

  double word_logprob(const Tensor& h, const std::string& word) const;

  // unnormalized ln p_char(v|h) for every vocabulary word
  std::vector<double> vocab_logprobs(const Tensor& h, const Vocabulary& vocab) const;

 private:
  long ctx_dim_, char_dim_, hidden_;
  CharCodec codec_;
  Parameter* init_w_;  // [ctx_dim, 2*hidden]
  Parameter* init_b_;
  Parameter* char_emb_;  // [259, char_dim]
  LSTMPCell cell_;
  Parameter* out_w_;  // [hidden, 259]
  Parameter* out_b_;
};

// Exact renormalization of the char model over the vocabulary:
// ln p'(w) = ln p_char(w|h) - ln sum_v p_char(v|h).
std::vector<double> marginalize_in_vocab(const CharLSTMHead& head, const Tensor& h,
                                         const Vocabulary& vocab);

}  // namespace lmkit
