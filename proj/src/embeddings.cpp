#include "lmkit/embeddings.hpp"

#include <algorithm>
#include <cmath>

namespace lmkit {

WordEmbeddingTable::WordEmbeddingTable(ParameterStore& params, const std::string& name,
                                       long vocab_size, long dim, Rng& rng)
    : vocab_size_(vocab_size), dim_(dim) {
  table_ = &params.add(name, make_uniform(vocab_size, dim, dim, rng));
}

WordEmbeddingTable::WordEmbeddingTable(ParameterStore& params, const std::string& name,
                                       long vocab_size, long dim)
    : vocab_size_(vocab_size), dim_(dim) {
  table_ = &params.get(name);
}

Value WordEmbeddingTable::embed(Graph& g, const std::vector<WordId>& ids) const {
  return g.lookup(g.param(*table_), std::vector<long>(ids.begin(), ids.end()), 1);
}

Value highway(Graph& g, Value x, Value wt, Value bt, Value wh, Value bh) {
  Value t = g.sigmoid(g.affine(x, wt, bt));
  Value h = g.relu(g.affine(x, wh, bh));
  Value ones = g.input(Tensor::full(t.rows(), t.cols(), 1.0));
  return g.add(g.mul(t, h), g.mul(g.sub(ones, t), x));
}

static void validate_cfg(const CharCNNConfig& cfg, const CharCodec& codec) {
  if (cfg.widths.size() != cfg.features.size())
    throw std::invalid_argument("CharCNN: widths/features size mismatch");
  for (long w : cfg.widths)
    if (w < 1 || w > codec.max_word_length)
      throw std::invalid_argument("CharCNN: filter width out of range");
}

CharCNNEmbedder::CharCNNEmbedder(ParameterStore& params, const std::string& prefix,
                                 const CharCNNConfig& cfg, const CharCodec& codec, Rng& rng)
    : cfg_(cfg), codec_(codec) {
  validate_cfg(cfg_, codec_);
  chars_ = &params.add(prefix + ".chars",
                       make_uniform(CharCodec::kAlphabet, cfg_.char_dim, cfg_.char_dim, rng));
  for (size_t i = 0; i < cfg_.widths.size(); ++i) {
    long w = cfg_.widths[i], n = cfg_.features[i];
    long in = w * cfg_.char_dim;
    filters_.push_back(&params.add(prefix + ".conv" + std::to_string(w) + ".w",
                                   make_uniform(in, n, in, rng)));
    fbias_.push_back(&params.add(prefix + ".conv" + std::to_string(w) + ".b", Tensor(1, n)));
  }
  long f = cfg_.total_features();
  for (long l = 0; l < cfg_.highway_layers; ++l) {
    std::string hp = prefix + ".hw" + std::to_string(l);
    hw_wt_.push_back(&params.add(hp + ".wt", make_uniform(f, f, f, rng)));
    hw_bt_.push_back(&params.add(hp + ".bt", Tensor(1, f)));
    hw_wh_.push_back(&params.add(hp + ".wh", make_uniform(f, f, f, rng)));
    hw_bh_.push_back(&params.add(hp + ".bh", Tensor(1, f)));
  }
  out_w_ = &params.add(prefix + ".out.w", make_uniform(f, cfg_.out_dim, f, rng));
  out_b_ = &params.add(prefix + ".out.b", Tensor(1, cfg_.out_dim));
}

CharCNNEmbedder::CharCNNEmbedder(ParameterStore& params, const std::string& prefix,
                                 const CharCNNConfig& cfg, const CharCodec& codec)
    : cfg_(cfg), codec_(codec) {
  validate_cfg(cfg_, codec_);
  chars_ = &params.get(prefix + ".chars");
  for (long w : cfg_.widths) {
    filters_.push_back(&params.get(prefix + ".conv" + std::to_string(w) + ".w"));
    fbias_.push_back(&params.get(prefix + ".conv" + std::to_string(w) + ".b"));
  }
  for (long l = 0; l < cfg_.highway_layers; ++l) {
    std::string hp = prefix + ".hw" + std::to_string(l);
    hw_wt_.push_back(&params.get(hp + ".wt"));
    hw_bt_.push_back(&params.get(hp + ".bt"));
    hw_wh_.push_back(&params.get(hp + ".wh"));
    hw_bh_.push_back(&params.get(hp + ".bh"));
  }
  out_w_ = &params.get(prefix + ".out.w");
  out_b_ = &params.get(prefix + ".out.b");
}

long CharCNNEmbedder::param_count() const {
  long n = chars_->value.size() + out_w_->value.size() + out_b_->value.size();
  for (size_t i = 0; i < filters_.size(); ++i)
    n += filters_[i]->value.size() + fbias_[i]->value.size();
  for (size_t l = 0; l < hw_wt_.size(); ++l)
    n += hw_wt_[l]->value.size() + hw_bt_[l]->value.size() + hw_wh_[l]->value.size() +
         hw_bh_[l]->value.size();
  return n;
}

Value CharCNNEmbedder::embed_codes(Graph& g, const std::vector<long>& codes) const {
  long L = codec_.max_word_length;
  if (codes.empty() || codes.size() % static_cast<size_t>(L) != 0)
    throw std::invalid_argument("charcnn_embed: code count not a multiple of max_word_length");
  long n_words = static_cast<long>(codes.size()) / L;
  Value table = g.param(*chars_);
  std::vector<Value> feats;
  for (size_t i = 0; i < cfg_.widths.size(); ++i) {
    long w = cfg_.widths[i];
    long windows = L - w + 1;
    std::vector<long> ids;
    ids.reserve(static_cast<size_t>(n_words * windows * w));
    for (long b = 0; b < n_words; ++b)
      for (long t = 0; t < windows; ++t)
        for (long j = 0; j < w; ++j) ids.push_back(codes[static_cast<size_t>(b * L + t + j)]);
    Value conv =
        g.tanh(g.affine(g.lookup(table, std::move(ids), w), g.param(*filters_[i]),
                        g.param(*fbias_[i])));
    feats.push_back(g.group_max(conv, windows));
  }
  Value x = g.concat_cols(feats);
  for (size_t l = 0; l < hw_wt_.size(); ++l)
    x = highway(g, x, g.param(*hw_wt_[l]), g.param(*hw_bt_[l]), g.param(*hw_wh_[l]),
                g.param(*hw_bh_[l]));
  return g.affine(x, g.param(*out_w_), g.param(*out_b_));
}

Value CharCNNEmbedder::embed_words(Graph& g, const std::vector<std::string>& words) const {
  std::vector<long> codes;
  codes.reserve(words.size() * static_cast<size_t>(codec_.max_word_length));
  for (const auto& w : words) {
    auto c = codec_.encode(w);
    codes.insert(codes.end(), c.begin(), c.end());
  }
  return embed_codes(g, codes);
}

Tensor CharCNNEmbedder::embed_words_tensor(const std::vector<std::string>& words) const {
  Graph g(/*grads_enabled=*/false);
  return embed_words(g, words).tensor();
}

std::vector<Neighbor> nearest_neighbors(const CharCNNEmbedder& embedder, const std::string& query,
                                        long k, const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("nearest_neighbors: no candidates");
  std::vector<std::string> all = candidates;
  all.push_back(query);
  Tensor emb = embedder.embed_words_tensor(all);
  long n = static_cast<long>(candidates.size());
  auto norm = [&](long i) { return std::max(emb.mat().row(i).norm(), 1e-300); };
  double qn = norm(n);
  std::vector<Neighbor> scored;
  for (long i = 0; i < n; ++i) {
    double sim = emb.mat().row(i).dot(emb.mat().row(n)) / (norm(i) * qn);
    scored.push_back({candidates[static_cast<size_t>(i)], sim});
  }
  std::sort(scored.begin(), scored.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.word < b.word;
  });
  if (k < static_cast<long>(scored.size())) scored.resize(static_cast<size_t>(k));
  return scored;
}

}  // namespace lmkit
