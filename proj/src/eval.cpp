#include "lmkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lmkit {

NeuralScorer::NeuralScorer(const LanguageModel& model, bool reset_per_sentence, Dist dist)
    : model_(&model), reset_per_sentence_(reset_per_sentence), dist_(dist) {
  if (dist_ == Dist::kTable) table_ = model.output_table();
  if (dist_ == Dist::kCharMarginal && !model.char_head())
    throw std::invalid_argument("NeuralScorer: model has no char head");
  start_corpus();
}

void NeuralScorer::start_corpus() {
  state_ = model_->zero_state(1);
  h_ = Tensor(1, model_->config().proj);
}

void NeuralScorer::start_sentence() {
  if (reset_per_sentence_) start_corpus();
}

void NeuralScorer::advance(WordId w) {
  Graph g(/*grads_enabled=*/false);
  std::vector<WordId> ids = {w};
  h_ = model_->forward_window(g, ids, 1, 1, state_, 0.0, false, dummy_rng_).tensor();
}

void NeuralScorer::consume(WordId w) { advance(w); }

double NeuralScorer::logprob_next(WordId w) {
  double lp;
  if (dist_ == Dist::kTable) {
    Eigen::VectorXd z = table_.mat() * h_.mat().row(0).transpose();
    double mx = z.maxCoeff();
    double lse = mx + std::log((z.array() - mx).exp().sum());
    lp = z[w] - lse;
  } else {
    lp = marginalize_in_vocab(*model_->char_head(), h_, model_->vocab())[static_cast<size_t>(w)];
  }
  advance(w);
  return lp;
}

std::vector<double> NeuralScorer::next_logprobs() {
  if (dist_ == Dist::kTable) {
    Eigen::VectorXd z = table_.mat() * h_.mat().row(0).transpose();
    double mx = z.maxCoeff();
    double lse = mx + std::log((z.array() - mx).exp().sum());
    std::vector<double> lp(static_cast<size_t>(z.size()));
    for (long i = 0; i < z.size(); ++i) lp[static_cast<size_t>(i)] = z[i] - lse;
    return lp;
  }
  return marginalize_in_vocab(*model_->char_head(), h_, model_->vocab());
}

void score_corpus(Scorer& scorer, const std::vector<SentenceIds>& sentences,
                  std::vector<double>& logprobs, std::vector<WordId>& targets) {
  logprobs.clear();
  targets.clear();
  scorer.start_corpus();
  for (const auto& s : sentences) {
    scorer.start_sentence();
    if (s.empty() || s.front() != Vocabulary::kBos)
      throw std::invalid_argument("score_corpus: sentences must start with <S>");
    scorer.consume(Vocabulary::kBos);
    for (size_t i = 1; i < s.size(); ++i) {
      double lp = scorer.logprob_next(s[i]);
      if (!std::isfinite(lp))
        throw std::runtime_error("perplexity: non-finite score at token " +
                                 std::to_string(logprobs.size()));
      logprobs.push_back(lp);
      targets.push_back(s[i]);
    }
  }
}

EvalReport report_from(const std::vector<double>& logprobs) {
  EvalReport r;
  r.tokens = static_cast<long>(logprobs.size());
  r.sum_logprob = std::accumulate(logprobs.begin(), logprobs.end(), 0.0);
  r.perplexity = r.tokens ? std::exp(-r.sum_logprob / static_cast<double>(r.tokens)) : 0.0;
  return r;
}

EvalReport perplexity(Scorer& scorer, const std::vector<SentenceIds>& sentences) {
  std::vector<double> lp;
  std::vector<WordId> tgt;
  score_corpus(scorer, sentences, lp, tgt);
  return report_from(lp);
}

std::vector<BucketRow> bucket_compare(const std::vector<double>& lnp_a,
                                      const std::vector<double>& lnp_b,
                                      const std::vector<WordId>& targets,
                                      const std::vector<long>& train_freq, long buckets) {
  size_t n = targets.size();
  if (lnp_a.size() != n || lnp_b.size() != n)
    throw std::invalid_argument("bucket_compare: score/target size mismatch");
  if (static_cast<long>(n) < buckets)
    throw std::invalid_argument("bucket_compare: corpus smaller than bucket count");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    long fi = train_freq.at(static_cast<size_t>(targets[i]));
    long fj = train_freq.at(static_cast<size_t>(targets[j]));
    if (fi != fj) return fi < fj;
    return targets[i] < targets[j];
  });
  std::vector<BucketRow> rows;
  for (long b = 0; b < buckets; ++b) {
    size_t lo = n * static_cast<size_t>(b) / static_cast<size_t>(buckets);
    size_t hi = n * static_cast<size_t>(b + 1) / static_cast<size_t>(buckets);
    BucketRow row{b, 0, 0, static_cast<long>(hi - lo), 0.0};
    long fmin = std::numeric_limits<long>::max(), fmax = 0;
    double sum = 0.0;
    for (size_t i = lo; i < hi; ++i) {
      size_t t = order[i];
      long f = train_freq.at(static_cast<size_t>(targets[t]));
      fmin = std::min(fmin, f);
      fmax = std::max(fmax, f);
      sum += lnp_a[t] - lnp_b[t];
    }
    row.min_freq = row.tokens ? fmin : 0;
    row.max_freq = fmax;
    row.mean_delta = row.tokens ? sum / static_cast<double>(row.tokens) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string bucket_table(const std::vector<BucketRow>& rows) {
  std::ostringstream out;
  out << "bucket\tmin_freq\tmax_freq\ttokens\tmean_delta\n";
  for (const auto& r : rows)
    out << r.index << '\t' << r.min_freq << '\t' << r.max_freq << '\t' << r.tokens << '\t'
        << r.mean_delta << '\n';
  return out.str();
}

std::vector<std::string> sample_sentences(const LanguageModel& model, long count, long max_len,
                                          double temperature, uint64_t seed,
                                          NeuralScorer::Dist dist) {
  if (temperature < 0.0) throw std::invalid_argument("sample_sentences: negative temperature");
  Rng rng(seed);
  NeuralScorer scorer(model, /*reset_per_sentence=*/true, dist);
  std::vector<std::string> out;
  for (long i = 0; i < count; ++i) {
    scorer.start_corpus();
    scorer.consume(Vocabulary::kBos);
    std::string sentence;
    for (long t = 0; t < max_len; ++t) {
      std::vector<double> lp = scorer.next_logprobs();
      lp[Vocabulary::kBos] = -std::numeric_limits<double>::infinity();  // never emit <S>
      WordId w;
      if (temperature == 0.0) {
        w = static_cast<WordId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
      } else {
        double mx = *std::max_element(lp.begin(), lp.end());
        std::vector<double> cdf(lp.size());
        double acc = 0.0;
        for (size_t j = 0; j < lp.size(); ++j) {
          acc += std::exp((lp[j] - mx) / temperature);
          cdf[j] = acc;
        }
        w = static_cast<WordId>(rng.sample_cdf(cdf));
      }
      if (w == Vocabulary::kEos) break;
      if (!sentence.empty()) sentence += ' ';
      sentence += model.vocab().word(w);
      scorer.consume(w);
    }
    out.push_back(std::move(sentence));
  }
  return out;
}

}  // namespace lmkit
