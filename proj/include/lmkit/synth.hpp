#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmkit/corpus.hpp"

namespace lmkit {

// Deterministic synthetic text with sentence-level topic structure: every
// sentence draws one topic, and a fixed fraction of its words come from that
// topic's private vocabulary. Word surfaces are syllabic, topic words share a
// topic-specific prefix, so both character- and word-level models have signal.
// An n-gram model only sees a few words back; a recurrent model can carry the
// topic across the whole sentence, which concentrates its advantage on the
// (globally rare) topic words.
struct SynthConfig {
  long topics = 8;
  long common_words = 800;
  long topic_words = 150;  // per topic
  long sentences = 50000;
  long min_length = 3;
  long mean_length = 18;  // geometric tail above min_length
  double topic_word_prob = 0.3;
  double zipf_exponent = 1.0;
  uint64_t seed = 2024;
};

std::vector<Sentence> generate_corpus(const SynthConfig& cfg);

// base-N syllabic surface form; distinct indices give distinct words
std::string synth_word(long index);

// Corpus drawn from a sharp random bigram chain over `vocab_words` word types
// (each word has a handful of likely successors), for quick-convergence
// training checks.
std::vector<Sentence> generate_bigram_corpus(long vocab_words, long sentences, long mean_length,
                                             uint64_t seed);

// deterministic split helper: every holdout_every-th sentence goes to heldout
void split_corpus(const std::vector<Sentence>& all, long holdout_every,
                  std::vector<Sentence>& train, std::vector<Sentence>& heldout);

void write_corpus_file(const std::string& path, const std::vector<Sentence>& sentences);

}  // namespace lmkit
