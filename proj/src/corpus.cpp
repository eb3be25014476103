#include "lmkit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lmkit {

std::vector<Sentence> tokenize_lines(const std::vector<std::string>& lines) {
  std::vector<Sentence> out;
  for (const auto& line : lines) {
    Sentence s;
    std::istringstream iss(line);
    std::string w;
    while (iss >> w) s.push_back(w);
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return tokenize_lines(lines);
}

Vocabulary Vocabulary::build(const std::vector<Sentence>& sentences, long max_size,
                             long min_count) {
  if (sentences.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  if (max_size < kReserved)
    throw std::invalid_argument("build_vocab: max_size must be >= " + std::to_string(kReserved));

  std::unordered_map<std::string, long> freq;
  long total_tokens = 0;
  for (const auto& s : sentences)
    for (const auto& w : s) {
      ++freq[w];
      ++total_tokens;
    }

  std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  long n_sent = static_cast<long>(sentences.size());
  v.words_ = {"<UNK>", "<S>", "</S>"};
  v.counts_ = {0, n_sent, n_sent};
  long keep = max_size - kReserved;
  for (const auto& [w, c] : items) {
    if (static_cast<long>(v.words_.size()) - kReserved >= keep || c < min_count) {
      v.counts_[kUnk] += c;
      continue;
    }
    v.map_[w] = static_cast<WordId>(v.words_.size());
    v.words_.push_back(w);
    v.counts_.push_back(c);
  }
  (void)total_tokens;
  return v;
}

SentenceIds Vocabulary::encode(const Sentence& s) const {
  SentenceIds ids;
  ids.reserve(s.size() + 2);
  ids.push_back(kBos);
  for (const auto& w : s) ids.push_back(lookup(w));
  ids.push_back(kEos);
  return ids;
}

std::vector<double> Vocabulary::unigram(double floor) const {
  double total = 0.0;
  for (long c : counts_) total += static_cast<double>(c);
  if (total <= 0.0) total = 1.0;
  std::vector<double> p(counts_.size());
  double sum = 0.0;
  for (size_t i = 0; i < counts_.size(); ++i) {
    p[i] = std::max(static_cast<double>(counts_[i]) / total, floor);
    sum += p[i];
  }
  for (auto& x : p) x /= sum;
  return p;
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (size_t i = 0; i < words_.size(); ++i) {
    mix(words_[i]);
    mix("\t" + std::to_string(counts_[i]) + "\n");
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  for (size_t i = 0; i < words_.size(); ++i) out << words_[i] << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("vocabulary file: malformed line: " + line);
    v.words_.push_back(line.substr(0, tab));
    v.counts_.push_back(std::stol(line.substr(tab + 1)));
  }
  if (v.words_.size() < kReserved || v.words_[0] != "<UNK>" || v.words_[1] != "<S>" ||
      v.words_[2] != "</S>")
    throw std::runtime_error("vocabulary file: reserved symbols missing or out of order");
  for (size_t i = kReserved; i < v.words_.size(); ++i)
    v.map_[v.words_[i]] = static_cast<WordId>(i);
  return v;
}

std::vector<long> CharCodec::encode(const std::string& word) const {
  std::vector<long> codes(static_cast<size_t>(max_word_length), kPad);
  codes[0] = kBow;
  long cap = max_word_length - 2;  // room for BOW and EOW
  long n = std::min<long>(static_cast<long>(word.size()), cap);
  for (long i = 0; i < n; ++i)
    codes[static_cast<size_t>(1 + i)] = static_cast<unsigned char>(word[static_cast<size_t>(i)]);
  codes[static_cast<size_t>(1 + n)] = kEow;
  return codes;
}

BatchStream::BatchStream(const std::vector<SentenceIds>& sentences, long batch_size) {
  if (batch_size < 1) throw std::invalid_argument("BatchStream: batch_size must be >= 1");
  if (sentences.empty()) throw std::invalid_argument("BatchStream: empty corpus");
  streams_.assign(static_cast<size_t>(batch_size), {});
  for (size_t i = 0; i < sentences.size(); ++i) {
    auto& s = streams_[i % static_cast<size_t>(batch_size)];
    s.insert(s.end(), sentences[i].begin(), sentences[i].end());
  }
  for (const auto& s : streams_)
    if (s.size() < 2)
      throw std::invalid_argument("BatchStream: corpus shorter than 2 tokens per stream");
  cursors_.assign(static_cast<size_t>(batch_size), 0);
  for (const auto& s : streams_)
    epoch_tokens_ = std::max(epoch_tokens_, static_cast<long>(s.size()));
}

void BatchStream::next_batch(long unroll, std::vector<WordId>& inputs,
                             std::vector<WordId>& targets) {
  if (unroll < 1) throw std::invalid_argument("next_batch: unroll must be >= 1");
  long b_count = batch_size();
  inputs.assign(static_cast<size_t>(b_count * unroll), 0);
  targets.assign(static_cast<size_t>(b_count * unroll), 0);
  for (long b = 0; b < b_count; ++b) {
    const auto& s = streams_[static_cast<size_t>(b)];
    long len = static_cast<long>(s.size());
    long c = cursors_[static_cast<size_t>(b)];
    for (long t = 0; t < unroll; ++t) {
      inputs[static_cast<size_t>(b * unroll + t)] = s[static_cast<size_t>((c + t) % len)];
      targets[static_cast<size_t>(b * unroll + t)] = s[static_cast<size_t>((c + t + 1) % len)];
    }
    cursors_[static_cast<size_t>(b)] = (c + unroll) % len;
  }
}

void BatchStream::set_cursors(const std::vector<long>& c) {
  if (c.size() != cursors_.size())
    throw std::invalid_argument("set_cursors: wrong stream count");
  cursors_ = c;
}

}  // namespace lmkit
