#include "lmkit/ensemble.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace lmkit {

MixtureScorer::MixtureScorer(std::vector<Scorer*> members, std::vector<double> weights,
                             long vocab_size) {
  (void)vocab_size;
  if (members.empty() || members.size() != weights.size())
    throw std::invalid_argument("MixtureScorer: members/weights mismatch");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("MixtureScorer: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("MixtureScorer: weights must sum to 1");
  members_ = std::move(members);
  weights_ = std::move(weights);
}

void MixtureScorer::start_corpus() {
  for (auto* m : members_) m->start_corpus();
}

void MixtureScorer::start_sentence() {
  for (auto* m : members_) m->start_sentence();
}

void MixtureScorer::consume(WordId w) {
  for (auto* m : members_) m->consume(w);
}

double MixtureScorer::logprob_next(WordId w) {
  double p = 0.0;
  for (size_t j = 0; j < members_.size(); ++j)
    p += weights_[j] * std::exp(members_[j]->logprob_next(w));
  return std::log(p);
}

namespace {
constexpr char kCacheMagic[4] = {'L', 'M', 'P', 'C'};
constexpr uint32_t kCacheVersion = 1;
}  // namespace

void ProbCache::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("ProbCache: cannot write " + path);
  out.write(kCacheMagic, 4);
  uint32_t ver = kCacheVersion, m = static_cast<uint32_t>(members());
  uint64_t t = static_cast<uint64_t>(tokens());
  out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  out.write(reinterpret_cast<const char*>(&m), sizeof(m));
  out.write(reinterpret_cast<const char*>(&t), sizeof(t));
  for (size_t i = 0; i < probs.size(); ++i) {
    int64_t tgt = targets[i];
    out.write(reinterpret_cast<const char*>(&tgt), sizeof(tgt));
    out.write(reinterpret_cast<const char*>(probs[i].data()),
              static_cast<std::streamsize>(probs[i].size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("ProbCache: write failed on " + path);
}

ProbCache ProbCache::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ProbCache: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCacheMagic, 4) != 0)
    throw std::runtime_error("ProbCache: bad magic in " + path);
  uint32_t ver = 0, m = 0;
  uint64_t t = 0;
  in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (ver != kCacheVersion) throw std::runtime_error("ProbCache: unsupported version");
  in.read(reinterpret_cast<char*>(&m), sizeof(m));
  in.read(reinterpret_cast<char*>(&t), sizeof(t));
  ProbCache c;
  c.probs.resize(t, std::vector<double>(m));
  c.targets.resize(t);
  for (uint64_t i = 0; i < t; ++i) {
    int64_t tgt = 0;
    in.read(reinterpret_cast<char*>(&tgt), sizeof(tgt));
    c.targets[i] = static_cast<WordId>(tgt);
    in.read(reinterpret_cast<char*>(c.probs[i].data()),
            static_cast<std::streamsize>(m * sizeof(double)));
  }
  if (!in) throw std::runtime_error("ProbCache: truncated file " + path);
  return c;
}

ProbCache ProbCache::build(std::vector<Scorer*> members,
                           const std::vector<SentenceIds>& heldout) {
  ProbCache c;
  for (size_t j = 0; j < members.size(); ++j) {
    std::vector<double> lp;
    std::vector<WordId> tgt;
    score_corpus(*members[j], heldout, lp, tgt);
    if (j == 0) {
      c.targets = tgt;
      c.probs.resize(lp.size(), std::vector<double>(members.size()));
    } else if (tgt != c.targets) {
      throw std::runtime_error("ProbCache: members disagree on targets (vocabulary mismatch?)");
    }
    for (size_t i = 0; i < lp.size(); ++i) c.probs[i][j] = std::exp(lp[i]);
  }
  return c;
}

double mixture_loglik(const ProbCache& cache, const std::vector<double>& weights) {
  if (static_cast<long>(weights.size()) != cache.members())
    throw std::invalid_argument("mixture_loglik: weight count mismatch");
  double ll = 0.0;
  for (const auto& row : cache.probs) {
    double p = 0.0;
    for (size_t j = 0; j < weights.size(); ++j) p += weights[j] * row[j];
    if (p <= 0.0) throw std::runtime_error("mixture: zero probability token");
    ll += std::log(p);
  }
  return ll;
}

EMTrace optimize_weights(const ProbCache& cache, long max_iters, double tol) {
  long m = cache.members();
  if (m < 2) throw std::invalid_argument("optimize_weights: need at least 2 members");
  for (const auto& row : cache.probs) {
    bool any = false;
    for (double p : row) any = any || p > 0.0;
    if (!any) throw std::runtime_error("optimize_weights: degenerate token with zero mass");
  }
  for (long j = 0; j < m; ++j) {
    bool nonzero = false;
    for (const auto& row : cache.probs) nonzero = nonzero || row[static_cast<size_t>(j)] > 0.0;
    if (!nonzero)
      throw std::runtime_error("optimize_weights: member " + std::to_string(j) +
                               " assigns zero probability everywhere");
  }
  EMTrace trace;
  trace.weights.assign(static_cast<size_t>(m), 1.0 / static_cast<double>(m));
  double prev = mixture_loglik(cache, trace.weights);
  trace.loglik_per_iter.push_back(prev);
  for (long it = 0; it < max_iters; ++it) {
    std::vector<double> resp(static_cast<size_t>(m), 0.0);
    for (const auto& row : cache.probs) {
      double p = 0.0;
      for (long j = 0; j < m; ++j)
        p += trace.weights[static_cast<size_t>(j)] * row[static_cast<size_t>(j)];
      for (long j = 0; j < m; ++j)
        resp[static_cast<size_t>(j)] +=
            trace.weights[static_cast<size_t>(j)] * row[static_cast<size_t>(j)] / p;
    }
    double n = static_cast<double>(cache.tokens());
    for (long j = 0; j < m; ++j) trace.weights[static_cast<size_t>(j)] = resp[static_cast<size_t>(j)] / n;
    double ll = mixture_loglik(cache, trace.weights);
    trace.loglik_per_iter.push_back(ll);
    if (ll - prev < tol) break;
    prev = ll;
  }
  return trace;
}

double mixture_perplexity(const ProbCache& cache, const std::vector<double>& weights) {
  return std::exp(-mixture_loglik(cache, weights) / static_cast<double>(cache.tokens()));
}

}  // namespace lmkit
