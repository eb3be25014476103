#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lmkit/corpus.hpp"
#include "lmkit/model.hpp"
#include "lmkit/ngram.hpp"

namespace lmkit {

// Streaming next-word scorer. The harness feeds <S> via consume() and scores
// every following token (including </S>) via logprob_next().
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual void start_corpus() = 0;
  virtual void start_sentence() = 0;
  virtual void consume(WordId w) = 0;                // advance without scoring
  virtual double logprob_next(WordId w) = 0;         // ln p(w | history), then advance
};

// LSTM-backed scorer over a precomputed output embedding table (full softmax
// or precomputed CNN softmax), or the marginalized char head.
class NeuralScorer : public Scorer {
 public:
  enum class Dist { kTable, kCharMarginal };

  NeuralScorer(const LanguageModel& model, bool reset_per_sentence,
               Dist dist = Dist::kTable);

  void start_corpus() override;
  void start_sentence() override;
  void consume(WordId w) override;
  double logprob_next(WordId w) override;

  // full next-word log distribution at the current state (used for sampling)
  std::vector<double> next_logprobs();

 private:
  void advance(WordId w);

  const LanguageModel* model_;
  bool reset_per_sentence_;
  Dist dist_;
  Tensor table_;  // [V, proj]
  std::vector<LSTMState> state_;
  Tensor h_;  // current context vector [1, proj]
  Rng dummy_rng_;
};

class KNScorer : public Scorer {
 public:
  explicit KNScorer(const KNModel& model) : model_(&model) {}
  void start_corpus() override { context_.clear(); }
  void start_sentence() override { context_.clear(); }
  void consume(WordId w) override { push(w); }
  double logprob_next(WordId w) override {
    double lp = model_->logprob(context_, w);
    push(w);
    return lp;
  }

 private:
  void push(WordId w) {
    context_.push_back(w);
    if (static_cast<long>(context_.size()) > model_->order() - 1)
      context_.erase(context_.begin());
  }
  const KNModel* model_;
  std::vector<WordId> context_;
};

struct EvalReport {
  long tokens = 0;
  double sum_logprob = 0.0;
  double perplexity = 0.0;
};

// Targets are w1..wn,</S> per sentence; <S> is consumed as input only.
EvalReport perplexity(Scorer& scorer, const std::vector<SentenceIds>& sentences);

// per-target ln p plus the target ids, in corpus order
void score_corpus(Scorer& scorer, const std::vector<SentenceIds>& sentences,
                  std::vector<double>& logprobs, std::vector<WordId>& targets);

EvalReport report_from(const std::vector<double>& logprobs);

struct BucketRow {
  long index;
  long min_freq;
  long max_freq;
  long tokens;
  double mean_delta;
};

// Holdout occurrences sorted by training frequency of their word type (ties
// by id), split into `buckets` contiguous groups of equal token count (+-1);
// mean (lnp_a - lnp_b) per bucket, rarest bucket first.
std::vector<BucketRow> bucket_compare(const std::vector<double>& lnp_a,
                                      const std::vector<double>& lnp_b,
                                      const std::vector<WordId>& targets,
                                      const std::vector<long>& train_freq, long buckets);

std::string bucket_table(const std::vector<BucketRow>& rows);

// Ancestral sampling from <S> until </S> or max_len. temperature 0 means
// greedy argmax. <S> is never emitted.
std::vector<std::string> sample_sentences(const LanguageModel& model, long count, long max_len,
                                          double temperature, uint64_t seed,
                                          NeuralScorer::Dist dist = NeuralScorer::Dist::kTable);

}  // namespace lmkit
