#include "lmkit/heads.hpp"

#include <cmath>

namespace lmkit {

FullSoftmaxHead::FullSoftmaxHead(ParameterStore& params, const std::string& name, long vocab_size,
                                 long dim, Rng& rng)
    : vocab_size_(vocab_size), dim_(dim) {
  emb_ = &params.add(name, make_uniform(vocab_size, dim, dim, rng));
}

FullSoftmaxHead::FullSoftmaxHead(ParameterStore& params, const std::string& name, long vocab_size,
                                 long dim)
    : vocab_size_(vocab_size), dim_(dim) {
  emb_ = &params.get(name);
}

Value FullSoftmaxHead::logits(Graph& g, Value h) const {
  if (h.cols() != dim_)
    throw std::invalid_argument("full_logprob: context width " + std::to_string(h.cols()) +
                                " != " + std::to_string(dim_));
  return g.matmul(h, g.param(*emb_), false, true);
}

Value FullSoftmaxHead::logprobs(Graph& g, Value h) const { return g.log_softmax(logits(g, h)); }

std::vector<WordId> draw_samples(const SampledLossConfig& cfg, Rng& rng) {
  if (cfg.k < 1) throw std::invalid_argument("draw_samples: k must be >= 1");
  if (cfg.proposal.empty()) throw std::invalid_argument("draw_samples: empty proposal");
  std::vector<double> cdf(cfg.proposal.size());
  double acc = 0.0;
  for (size_t i = 0; i < cfg.proposal.size(); ++i) {
    if (cfg.proposal[i] <= 0.0)
      throw std::invalid_argument("draw_samples: proposal must be strictly positive");
    acc += cfg.proposal[i];
    cdf[i] = acc;
  }
  std::vector<WordId> out(static_cast<size_t>(cfg.k));
  for (auto& w : out) w = rng.sample_cdf(cdf);
  return out;
}

Value candidate_logits(Graph& g, Value h, Value emb, const std::vector<WordId>& ids, long k1) {
  return g.gathered_scores(h, emb, std::vector<long>(ids.begin(), ids.end()), k1);
}

static Tensor proposal_shift(const std::vector<WordId>& ids, long n, long k1,
                             const std::vector<double>& proposal, double extra) {
  Tensor shift(n, k1);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < k1; ++j) {
      WordId w = ids[static_cast<size_t>(i * k1 + j)];
      double pn = proposal.at(static_cast<size_t>(w));
      if (pn <= 0.0)
        throw std::invalid_argument("sampled loss: proposal probability is zero for word " +
                                    std::to_string(w));
      shift.at(i, j) = -std::log(pn) - extra;
    }
  return shift;
}

Value is_loss(Graph& g, Value logits, const std::vector<WordId>& ids,
              const std::vector<double>& proposal) {
  long n = logits.rows(), k1 = logits.cols();
  if (static_cast<long>(ids.size()) != n * k1)
    throw std::invalid_argument("is_loss: ids size mismatch");
  Value adj = g.add_const(logits, proposal_shift(ids, n, k1, proposal, 0.0));
  Value lp = g.pick(g.log_softmax(adj), std::vector<long>(static_cast<size_t>(n), 0));
  return g.scale(g.sum_all(lp), -1.0 / static_cast<double>(n));
}

Value nce_loss(Graph& g, Value logits, const std::vector<WordId>& ids,
               const std::vector<double>& proposal, long k) {
  long n = logits.rows(), k1 = logits.cols();
  if (static_cast<long>(ids.size()) != n * k1)
    throw std::invalid_argument("nce_loss: ids size mismatch");
  Value a = g.add_const(logits, proposal_shift(ids, n, k1, proposal,
                                               std::log(static_cast<double>(k))));
  Value pos = g.softplus(g.scale(g.slice_cols(a, 0, 1), -1.0));
  Value loss = g.sum_all(pos);
  if (k1 > 1) loss = g.add(loss, g.sum_all(g.softplus(g.slice_cols(a, 1, k1 - 1))));
  return g.scale(loss, 1.0 / static_cast<double>(n));
}

CNNSoftmaxHead::CNNSoftmaxHead(ParameterStore& params, const std::string& prefix,
                               const CharCNNConfig& cnn_cfg, const CharCodec& codec,
                               const Vocabulary& vocab, long corr_dim, Rng& rng, double lr_scale)
    : cnn_(params, prefix + ".cnn", cnn_cfg, codec, rng), vocab_(&vocab), corr_dim_(corr_dim) {
  if (corr_dim_ < 0) throw std::invalid_argument("CNNSoftmaxHead: corr_dim must be >= 0");
  if (corr_dim_ > 0) {
    corr_ = &params.add(prefix + ".corr",
                        make_uniform(vocab.size(), corr_dim_, corr_dim_, rng));
    m_ = &params.add(prefix + ".m", make_uniform(proj_dim(), corr_dim_, corr_dim_, rng));
  }
  // the CNN-generated logits are tied across words, so the whole head trains
  // with a reduced rate
  for (auto& p : params)
    if (p->name.rfind(prefix + ".", 0) == 0) p->lr_scale = lr_scale;
  encode_vocab();
}

CNNSoftmaxHead::CNNSoftmaxHead(ParameterStore& params, const std::string& prefix,
                               const CharCNNConfig& cnn_cfg, const CharCodec& codec,
                               const Vocabulary& vocab, long corr_dim)
    : cnn_(params, prefix + ".cnn", cnn_cfg, codec), vocab_(&vocab), corr_dim_(corr_dim) {
  if (corr_dim_ > 0) {
    corr_ = &params.get(prefix + ".corr");
    m_ = &params.get(prefix + ".m");
  }
  encode_vocab();
}

void CNNSoftmaxHead::encode_vocab() {
  long L = cnn_.codec().max_word_length;
  vocab_codes_.reserve(static_cast<size_t>(vocab_->size() * L));
  for (WordId w = 0; w < vocab_->size(); ++w) {
    auto c = cnn_.codec().encode(vocab_->word(w));
    vocab_codes_.insert(vocab_codes_.end(), c.begin(), c.end());
  }
}

long CNNSoftmaxHead::param_count() const {
  long n = cnn_.param_count();
  if (corr_) n += corr_->value.size() + m_->value.size();
  return n;
}

Value CNNSoftmaxHead::embeddings_for(Graph& g, const std::vector<WordId>& ids) const {
  long L = cnn_.codec().max_word_length;
  std::vector<long> codes;
  codes.reserve(ids.size() * static_cast<size_t>(L));
  for (WordId w : ids) {
    if (w < 0 || w >= vocab_->size())
      throw std::out_of_range("CNNSoftmaxHead: word id out of range");
    auto begin = vocab_codes_.begin() + w * L;
    codes.insert(codes.end(), begin, begin + L);
  }
  Value e = cnn_.embed_codes(g, codes);
  if (corr_) {
    Value c = g.lookup(g.param(*corr_), std::vector<long>(ids.begin(), ids.end()), 1);
    e = g.add(e, g.matmul(c, g.param(*m_), false, true));
  }
  return e;
}

double CNNSoftmaxHead::logit(const Tensor& h, WordId w) const {
  Graph g(/*grads_enabled=*/false);
  Value e = embeddings_for(g, {w});
  return h.mat().row(0).dot(e.tensor().mat().row(0));
}

Tensor CNNSoftmaxHead::precompute_table() const {
  Graph g(/*grads_enabled=*/false);
  std::vector<WordId> all(static_cast<size_t>(vocab_->size()));
  for (WordId w = 0; w < vocab_->size(); ++w) all[static_cast<size_t>(w)] = w;
  return embeddings_for(g, all).tensor();
}

CharLSTMHead::CharLSTMHead(ParameterStore& params, const std::string& prefix, long ctx_dim,
                           long char_dim, long hidden, const CharCodec& codec, Rng& rng)
    : ctx_dim_(ctx_dim),
      char_dim_(char_dim),
      hidden_(hidden),
      codec_(codec),
      cell_(params, prefix + ".cell", char_dim, hidden, hidden, rng) {
  init_w_ = &params.add(prefix + ".init.w", make_uniform(ctx_dim, 2 * hidden, ctx_dim, rng));
  init_b_ = &params.add(prefix + ".init.b", Tensor(1, 2 * hidden));
  char_emb_ = &params.add(prefix + ".chars",
                          make_uniform(CharCodec::kAlphabet, char_dim, char_dim, rng));
  out_w_ = &params.add(prefix + ".out.w", make_uniform(hidden, CharCodec::kAlphabet, hidden, rng));
  out_b_ = &params.add(prefix + ".out.b", Tensor(1, CharCodec::kAlphabet));
}

CharLSTMHead::CharLSTMHead(ParameterStore& params, const std::string& prefix, long ctx_dim,
                           long char_dim, long hidden, const CharCodec& codec)
    : ctx_dim_(ctx_dim),
      char_dim_(char_dim),
      hidden_(hidden),
      codec_(codec),
      cell_(params, prefix + ".cell", char_dim, hidden, hidden) {
  init_w_ = &params.get(prefix + ".init.w");
  init_b_ = &params.get(prefix + ".init.b");
  char_emb_ = &params.get(prefix + ".chars");
  out_w_ = &params.get(prefix + ".out.w");
  out_b_ = &params.get(prefix + ".out.b");
}

Value CharLSTMHead::word_logprobs(Graph& g, Value hctx, const std::vector<long>& codes) const {
  long L = codec_.max_word_length;
  long n = hctx.rows();
  if (static_cast<long>(codes.size()) != n * L)
    throw std::invalid_argument("char_lstm_logprob: wrong code length");
  Value init = g.affine(hctx, g.param(*init_w_), g.param(*init_b_));
  Value h = g.slice_cols(init, 0, hidden_);
  Value c = g.slice_cols(init, hidden_, hidden_);
  Value emb_table = g.param(*char_emb_);
  Value out_w = g.param(*out_w_);
  Value out_b = g.param(*out_b_);
  Value total = g.input(Tensor(n, 1));
  for (long t = 0; t + 1 < L; ++t) {
    std::vector<long> cur(static_cast<size_t>(n)), nxt(static_cast<size_t>(n));
    Tensor mask(n, 1);
    bool any = false;
    for (long i = 0; i < n; ++i) {
      long cc = codes[static_cast<size_t>(i * L + t)];
      cur[static_cast<size_t>(i)] = cc;
      nxt[static_cast<size_t>(i)] = codes[static_cast<size_t>(i * L + t + 1)];
      bool active = cc != CharCodec::kEow && cc != CharCodec::kPad;
      mask.at(i, 0) = active ? 1.0 : 0.0;
      any = any || active;
    }
    if (!any) break;
    Value x = g.lookup(emb_table, std::move(cur), 1);
    auto [h2, c2] = cell_.step(g, x, h, c);
    h = h2;
    c = c2;
    Value lp = g.pick(g.log_softmax(g.affine(h, out_w, out_b)), std::move(nxt));
    total = g.add(total, g.mul_const(lp, mask));
  }
  return total;
}

Value CharLSTMHead::loss(Graph& g, Value hctx, const std::vector<long>& codes) const {
  return g.scale(g.sum_all(word_logprobs(g, hctx, codes)),
                 -1.0 / static_cast<double>(hctx.rows()));
}

double CharLSTMHead::word_logprob(const Tensor& h, const std::string& word) const {
  Graph g(/*grads_enabled=*/false);
  return word_logprobs(g, g.input(h), codec_.encode(word)).tensor()[0];
}

std::vector<double> CharLSTMHead::vocab_logprobs(const Tensor& h, const Vocabulary& vocab) const {
  long v = vocab.size();
  long L = codec_.max_word_length;
  Graph g(/*grads_enabled=*/false);
  Tensor hrep(v, ctx_dim_);
  for (long i = 0; i < v; ++i) hrep.mat().row(i) = h.mat().row(0);
  std::vector<long> codes;
  codes.reserve(static_cast<size_t>(v * L));
  for (WordId w = 0; w < v; ++w) {
    auto c = codec_.encode(vocab.word(w));
    codes.insert(codes.end(), c.begin(), c.end());
  }
  Tensor lp = word_logprobs(g, g.input(std::move(hrep)), codes).tensor();
  std::vector<double> out(static_cast<size_t>(v));
  for (long i = 0; i < v; ++i) out[static_cast<size_t>(i)] = lp.at(i, 0);
  return out;
}

std::vector<double> marginalize_in_vocab(const CharLSTMHead& head, const Tensor& h,
                                         const Vocabulary& vocab) {
  std::vector<double> lp = head.vocab_logprobs(h, vocab);
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : lp) mx = std::max(mx, v);
  if (!std::isfinite(mx)) throw std::runtime_error("marginalize_in_vocab: all-zero mass");
  double sum = 0.0;
  for (double v : lp) sum += std::exp(v - mx);
  double lse = mx + std::log(sum);
  for (auto& v : lp) v -= lse;
  return lp;
}

}  // namespace lmkit
