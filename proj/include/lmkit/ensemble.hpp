#pragma once

#include <string>
#include <vector>

#include "lmkit/eval.hpp"

namespace lmkit {

// Probability-level linear interpolation of member scorers sharing one
// vocabulary.
class MixtureScorer : public Scorer {
 public:
  MixtureScorer(std::vector<Scorer*> members, std::vector<double> weights, long vocab_size);

  void start_corpus() override;
  void start_sentence() override;
  void consume(WordId w) override;
  double logprob_next(WordId w) override;

 private:
  std::vector<Scorer*> members_;
  std::vector<double> weights_;
};

// Per-token member probabilities cached on disk so EM can make many passes.
// Binary, versioned header; see the README for the exact layout.
struct ProbCache {
  std::vector<std::vector<double>> probs;  // [tokens][members]
  std::vector<WordId> targets;

  long members() const { return probs.empty() ? 0 : static_cast<long>(probs[0].size()); }
  long tokens() const { return static_cast<long>(probs.size()); }

  void save(const std::string& path) const;
  static ProbCache load(const std::string& path);

  static ProbCache build(std::vector<Scorer*> members, const std::vector<SentenceIds>& heldout);
};

double mixture_loglik(const ProbCache& cache, const std::vector<double>& weights);

struct EMTrace {
  std::vector<double> weights;
  std::vector<double> loglik_per_iter;  // monotone non-decreasing
};

// EM over the mixture weights, uniform init, capped at max_iters or a
// log-likelihood improvement below tol.
EMTrace optimize_weights(const ProbCache& cache, long max_iters = 200, double tol = 1e-8);

double mixture_perplexity(const ProbCache& cache, const std::vector<double>& weights);

}  // namespace lmkit
