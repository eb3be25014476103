#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace lmkit {

using WordId = long;

// Tokenized corpus: one sentence per line, whitespace split.
using Sentence = std::vector<std::string>;
using SentenceIds = std::vector<WordId>;

std::vector<Sentence> read_corpus_file(const std::string& path);
std::vector<Sentence> tokenize_lines(const std::vector<std::string>& lines);

class Vocabulary {
 public:
  static constexpr WordId kUnk = 0;
  static constexpr WordId kBos = 1;  // <S>
  static constexpr WordId kEos = 2;  // </S>
  static constexpr long kReserved = 3;

  // Keeps the most frequent words up to max_size total entries (reserved
  // symbols included); everything else maps to UNK. Words below min_count are
  // dropped too. Ties broken by lexicographic order.
  static Vocabulary build(const std::vector<Sentence>& sentences, long max_size,
                          long min_count = 1);

  WordId lookup(const std::string& word) const {
    auto it = map_.find(word);
    return it == map_.end() ? kUnk : it->second;
  }
  const std::string& word(WordId id) const { return words_.at(static_cast<size_t>(id)); }
  long count(WordId id) const { return counts_.at(static_cast<size_t>(id)); }
  long size() const { return static_cast<long>(words_.size()); }

  SentenceIds encode(const Sentence& s) const;

  // unigram distribution over ids, floored and renormalized (proposal for
  // sampled losses)
  std::vector<double> unigram(double floor = 1e-9) const;

  uint64_t hash() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, WordId> map_;
  std::vector<std::string> words_;
  std::vector<long> counts_;
};

// Fixed-width byte-level word encoding with begin/end-of-word and pad codes.
struct CharCodec {
  static constexpr long kBow = 256;
  static constexpr long kEow = 257;
  static constexpr long kPad = 258;
  static constexpr long kAlphabet = 259;

  long max_word_length = 16;

  explicit CharCodec(long max_len = 16) : max_word_length(max_len) {
    if (max_len < 3) throw std::invalid_argument("CharCodec: max_word_length must be >= 3");
  }

  // [BOW] + bytes + [EOW] + pads, always exactly max_word_length codes; long
  // words are byte-truncated before EOW.
  std::vector<long> encode(const std::string& word) const;
};

// B independent token streams for truncated BPTT. Sentences are dealt
// round-robin to streams; each stream is its concatenated <S> w.. </S>
// sequence and wraps to its own start when exhausted.
class BatchStream {
 public:
  BatchStream(const std::vector<SentenceIds>& sentences, long batch_size);

  long batch_size() const { return static_cast<long>(streams_.size()); }
  // longest stream length; one epoch serves each stream once
  long epoch_tokens() const { return epoch_tokens_; }

  // inputs/targets are row-major [B x T]; targets are inputs shifted by one
  // within each stream.
  void next_batch(long unroll, std::vector<WordId>& inputs, std::vector<WordId>& targets);

  std::vector<long> cursors() const { return cursors_; }
  void set_cursors(const std::vector<long>& c);

  const std::vector<WordId>& stream(long b) const { return streams_.at(static_cast<size_t>(b)); }

 private:
  std::vector<std::vector<WordId>> streams_;
  std::vector<long> cursors_;
  long epoch_tokens_ = 0;
};

}  // namespace lmkit
