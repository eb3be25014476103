#pragma once

#include <string>
#include <vector>

#include "lmkit/corpus.hpp"

namespace lmkit {

// Interpolated Kneser-Ney with a single absolute discount per order,
// D = n1/(n1+2*n2) estimated from that order's (adjusted) counts. The highest
// order uses raw counts; lower orders use continuation counts derived from the
// raw counts one order up. Contexts never cross </S>; short left contexts are
// padded with <S>. The distribution support is V minus <S>.
class KNModel {
 public:
  static KNModel train(const std::vector<SentenceIds>& sentences, long order, long vocab_size);

  long order() const { return order_; }
  long vocab_size() const { return vocab_size_; }
  double discount(long n) const { return orders_.at(static_cast<size_t>(n - 1)).discount; }

  // context: up to order-1 most recent ids, oldest first
  double prob(const std::vector<WordId>& context, WordId word) const;
  double logprob(const std::vector<WordId>& context, WordId word) const;

  // plain-text inspection dump (one "n<TAB>gram ids<TAB>adjusted count" line
  // per entry plus per-order discount headers)
  void export_counts(const std::string& path) const;

  void save(const std::string& path) const;
  static KNModel load(const std::string& path);

 private:
  using Key = unsigned __int128;
  static constexpr int kBits = 21;  // per-id field; order*kBits must fit 128 bits

  struct OrderTable {
    std::vector<Key> keys;        // sorted n-gram keys, word in the low bits
    std::vector<double> counts;   // adjusted counts
    std::vector<Key> ctx_keys;    // sorted context keys
    std::vector<double> ctx_total;
    std::vector<long> ctx_distinct;
    double discount = 0.0;

    double count_of(Key k) const;
    bool context_of(Key ctx, double& total, long& distinct) const;
  };

  double prob_rec(long n, const std::vector<WordId>& padded_ctx, WordId word) const;

  long order_ = 0;
  long vocab_size_ = 0;
  std::vector<OrderTable> orders_;  // index n-1
};

}  // namespace lmkit
