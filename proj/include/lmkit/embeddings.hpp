#pragma once

#include <string>
#include <vector>

#include "lmkit/corpus.hpp"
#include "lmkit/graph.hpp"
#include "lmkit/optim.hpp"

namespace lmkit {

// Plain learned lookup table, one row per vocabulary id.
class WordEmbeddingTable {
 public:
  WordEmbeddingTable(ParameterStore& params, const std::string& name, long vocab_size, long dim,
                     Rng& rng);
  WordEmbeddingTable(ParameterStore& params, const std::string& name, long vocab_size, long dim);

  long vocab_size() const { return vocab_size_; }
  long dim() const { return dim_; }
  long param_count() const { return vocab_size_ * dim_; }
  Parameter& table() { return *table_; }

  // ids -> [N, dim]; gradient scatters only into the used rows
  Value embed(Graph& g, const std::vector<WordId>& ids) const;

 private:
  long vocab_size_, dim_;
  Parameter* table_;
};

struct CharCNNConfig {
  long char_dim = 16;
  std::vector<long> widths = {1, 2, 3, 4, 5};
  std::vector<long> features = {32, 32, 32, 16, 16};
  long highway_layers = 2;
  long out_dim = 128;

  long total_features() const {
    long f = 0;
    for (long n : features) f += n;
    return f;
  }
};

// y = t.relu(Hx) + (1-t).x with t = sigmoid(Tx); square dims.
Value highway(Graph& g, Value x, Value wt, Value bt, Value wh, Value bh);

// Character-CNN word embedder: per-width 1-d convolutions over the fixed-width
// code sequence, tanh, max over time, concat, 2 highway layers, output affine.
class CharCNNEmbedder {
 public:
  CharCNNEmbedder(ParameterStore& params, const std::string& prefix, const CharCNNConfig& cfg,
                  const CharCodec& codec, Rng& rng);
  CharCNNEmbedder(ParameterStore& params, const std::string& prefix, const CharCNNConfig& cfg,
                  const CharCodec& codec);

  const CharCNNConfig& config() const { return cfg_; }
  const CharCodec& codec() const { return codec_; }
  long out_dim() const { return cfg_.out_dim; }
  long param_count() const;  // independent of vocabulary size

  // codes: N words, each exactly max_word_length codes, flattened -> [N, out]
  Value embed_codes(Graph& g, const std::vector<long>& codes) const;
  Value embed_words(Graph& g, const std::vector<std::string>& words) const;

  // inference helper: plain tensor output, no gradients
  Tensor embed_words_tensor(const std::vector<std::string>& words) const;

 private:
  CharCNNConfig cfg_;
  CharCodec codec_;
  Parameter* chars_;                 // [259, char_dim]
  std::vector<Parameter*> filters_;  // per width: [w*char_dim, n_w]
  std::vector<Parameter*> fbias_;
  std::vector<Parameter*> hw_wt_, hw_bt_, hw_wh_, hw_bh_;
  Parameter* out_w_;
  Parameter* out_b_;
};

struct Neighbor {
  std::string word;
  double similarity;
};

// Top-K candidates by cosine similarity in the embedder's output space; ties
// broken lexicographically. The query may be out of vocabulary.
std::vector<Neighbor> nearest_neighbors(const CharCNNEmbedder& embedder, const std::string& query,
                                        long k, const std::vector<std::string>& candidates);

}  // namespace lmkit
