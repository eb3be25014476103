#include "lmkit/synth.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "lmkit/prng.hpp"

namespace lmkit {

namespace {

const char* kSyllables[] = {"ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lo", "mu",
                            "na", "pe", "ri", "so", "tu", "va", "we", "xi", "yo", "zu",
                            "bra", "cle", "dri", "flo", "gru", "sha", "ste", "tri", "plo", "kru"};
constexpr long kNumSyllables = 30;

std::vector<double> zipf_cdf(long n, double exponent) {
  std::vector<double> cdf(static_cast<size_t>(n));
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    acc += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
    cdf[static_cast<size_t>(i)] = acc;
  }
  return cdf;
}

}  // namespace

std::string synth_word(long index) {
  if (index < 0) throw std::invalid_argument("synth_word: negative index");
  std::string w;
  long i = index;
  do {
    w += kSyllables[i % kNumSyllables];
    i /= kNumSyllables;
  } while (i > 0);
  return w;
}

std::vector<Sentence> generate_corpus(const SynthConfig& cfg) {
  if (cfg.topics < 1 || cfg.common_words < 1 || cfg.topic_words < 1 || cfg.sentences < 1)
    throw std::invalid_argument("generate_corpus: all sizes must be positive");
  if (cfg.min_length < 1 || cfg.mean_length < cfg.min_length)
    throw std::invalid_argument("generate_corpus: bad length settings");
  if (cfg.topic_word_prob < 0.0 || cfg.topic_word_prob > 1.0)
    throw std::invalid_argument("generate_corpus: topic_word_prob must be in [0,1]");

  std::vector<std::string> common(static_cast<size_t>(cfg.common_words));
  for (long i = 0; i < cfg.common_words; ++i) common[static_cast<size_t>(i)] = synth_word(i);
  // topic words carry a topic-marker prefix and live past the common id range
  std::vector<std::vector<std::string>> topical(static_cast<size_t>(cfg.topics));
  for (long t = 0; t < cfg.topics; ++t) {
    auto& words = topical[static_cast<size_t>(t)];
    words.resize(static_cast<size_t>(cfg.topic_words));
    std::string prefix = std::string("q") + kSyllables[t % kNumSyllables];
    for (long i = 0; i < cfg.topic_words; ++i)
      words[static_cast<size_t>(i)] =
          prefix + synth_word(cfg.common_words + t * cfg.topic_words + i);
  }

  std::vector<double> common_cdf = zipf_cdf(cfg.common_words, cfg.zipf_exponent);
  std::vector<double> topic_cdf = zipf_cdf(cfg.topic_words, cfg.zipf_exponent);

  Rng rng(cfg.seed);
  double continue_p =
      1.0 - 1.0 / static_cast<double>(cfg.mean_length - cfg.min_length + 1);
  std::vector<Sentence> out;
  out.reserve(static_cast<size_t>(cfg.sentences));
  for (long s = 0; s < cfg.sentences; ++s) {
    long topic = static_cast<long>(rng.below(static_cast<uint64_t>(cfg.topics)));
    long len = cfg.min_length;
    while (rng.uniform() < continue_p) ++len;
    Sentence sent;
    sent.reserve(static_cast<size_t>(len));
    for (long i = 0; i < len; ++i) {
      if (rng.bernoulli(cfg.topic_word_prob))
        sent.push_back(topical[static_cast<size_t>(topic)]
                              [static_cast<size_t>(rng.sample_cdf(topic_cdf))]);
      else
        sent.push_back(common[static_cast<size_t>(rng.sample_cdf(common_cdf))]);
    }
    out.push_back(std::move(sent));
  }
  return out;
}

std::vector<Sentence> generate_bigram_corpus(long vocab_words, long sentences, long mean_length,
                                             uint64_t seed) {
  if (vocab_words < 2 || sentences < 1 || mean_length < 1)
    throw std::invalid_argument("generate_bigram_corpus: bad sizes");
  std::vector<std::string> words(static_cast<size_t>(vocab_words));
  for (long i = 0; i < vocab_words; ++i) words[static_cast<size_t>(i)] = synth_word(i);

  // sharp chain: from each word, 90% mass on one successor, 10% on another
  Rng rng(seed);
  std::vector<long> succ_a(static_cast<size_t>(vocab_words)), succ_b(succ_a.size());
  for (long i = 0; i < vocab_words; ++i) {
    succ_a[static_cast<size_t>(i)] = static_cast<long>(rng.below(static_cast<uint64_t>(vocab_words)));
    succ_b[static_cast<size_t>(i)] = static_cast<long>(rng.below(static_cast<uint64_t>(vocab_words)));
  }

  double continue_p = 1.0 - 1.0 / static_cast<double>(mean_length);
  std::vector<Sentence> out;
  out.reserve(static_cast<size_t>(sentences));
  for (long s = 0; s < sentences; ++s) {
    long w = static_cast<long>(rng.below(static_cast<uint64_t>(vocab_words)));
    Sentence sent{words[static_cast<size_t>(w)]};
    while (rng.uniform() < continue_p) {
      w = rng.bernoulli(0.9) ? succ_a[static_cast<size_t>(w)] : succ_b[static_cast<size_t>(w)];
      sent.push_back(words[static_cast<size_t>(w)]);
    }
    out.push_back(std::move(sent));
  }
  return out;
}

void split_corpus(const std::vector<Sentence>& all, long holdout_every,
                  std::vector<Sentence>& train, std::vector<Sentence>& heldout) {
  if (holdout_every < 2) throw std::invalid_argument("split_corpus: holdout_every must be >= 2");
  train.clear();
  heldout.clear();
  for (size_t i = 0; i < all.size(); ++i) {
    if (static_cast<long>(i % static_cast<size_t>(holdout_every)) == holdout_every - 1)
      heldout.push_back(all[i]);
    else
      train.push_back(all[i]);
  }
}

void write_corpus_file(const std::string& path, const std::vector<Sentence>& sentences) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_corpus_file: cannot open " + path);
  for (const auto& s : sentences) {
    for (size_t i = 0; i < s.size(); ++i) {
      if (i) out << ' ';
      out << s[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_corpus_file: write failed on " + path);
}

}  // namespace lmkit
