#include "lmkit/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lmkit/checkpoint.hpp"

namespace lmkit {

double KNModel::OrderTable::count_of(Key k) const {
  auto it = std::lower_bound(keys.begin(), keys.end(), k);
  if (it == keys.end() || *it != k) return 0.0;
  return counts[static_cast<size_t>(it - keys.begin())];
}

bool KNModel::OrderTable::context_of(Key ctx, double& total, long& distinct) const {
  auto it = std::lower_bound(ctx_keys.begin(), ctx_keys.end(), ctx);
  if (it == ctx_keys.end() || *it != ctx) return false;
  size_t i = static_cast<size_t>(it - ctx_keys.begin());
  total = ctx_total[i];
  distinct = ctx_distinct[i];
  return true;
}

KNModel KNModel::train(const std::vector<SentenceIds>& sentences, long order, long vocab_size) {
  if (sentences.empty()) throw std::invalid_argument("train_kn: empty corpus");
  if (order < 1) throw std::invalid_argument("train_kn: order must be >= 1");
  if (order * kBits > 126) throw std::invalid_argument("train_kn: order too large for packing");
  if (vocab_size >= (1L << kBits))
    throw std::invalid_argument("train_kn: vocabulary too large for desk-scale packing");
  long total_tokens = 0;
  for (const auto& s : sentences) total_tokens += static_cast<long>(s.size());
  if (total_tokens < order) throw std::invalid_argument("train_kn: corpus shorter than order");

  KNModel m;
  m.order_ = order;
  m.vocab_size_ = vocab_size;
  m.orders_.resize(static_cast<size_t>(order));

  // raw gram keys per order; word is the least-significant field
  std::vector<std::vector<Key>> raw(static_cast<size_t>(order + 1));
  for (const auto& s : sentences) {
    // s = [<S>, w1..wn, </S>]; targets are positions 1..end
    long len = static_cast<long>(s.size());
    for (long j = 1; j < len; ++j) {
      for (long n = 1; n <= order; ++n) {
        Key k = 0;
        for (long t = j - n + 1; t <= j; ++t) {
          WordId id = t < 0 ? Vocabulary::kBos : s[static_cast<size_t>(t)];
          k = (k << kBits) | static_cast<Key>(id);
        }
        raw[static_cast<size_t>(n)].push_back(k);
      }
    }
  }

  auto rle = [](std::vector<Key>& v, std::vector<Key>& keys, std::vector<double>& counts) {
    std::sort(v.begin(), v.end());
    keys.clear();
    counts.clear();
    for (size_t i = 0; i < v.size();) {
      size_t j = i;
      while (j < v.size() && v[j] == v[i]) ++j;
      keys.push_back(v[i]);
      counts.push_back(static_cast<double>(j - i));
      i = j;
    }
    v.clear();
    v.shrink_to_fit();
  };

  // raw counts, sorted+deduped, per order
  std::vector<std::vector<Key>> raw_keys(static_cast<size_t>(order + 1));
  std::vector<std::vector<double>> raw_counts(static_cast<size_t>(order + 1));
  for (long n = 1; n <= order; ++n)
    rle(raw[static_cast<size_t>(n)], raw_keys[static_cast<size_t>(n)],
        raw_counts[static_cast<size_t>(n)]);

  for (long n = order; n >= 1; --n) {
    OrderTable& tab = m.orders_[static_cast<size_t>(n - 1)];
    if (n == order) {
      // copied, not moved: the n-1 pass still reads these keys for its
      // continuation counts
      tab.keys = raw_keys[static_cast<size_t>(n)];
      tab.counts = raw_counts[static_cast<size_t>(n)];
    } else {
      // continuation counts: distinct left extensions in the raw (n+1)-grams
      std::vector<Key> stripped;
      stripped.reserve(raw_keys[static_cast<size_t>(n + 1)].size());
      Key mask = (Key(1) << (kBits * n)) - 1;
      for (Key k : raw_keys[static_cast<size_t>(n + 1)]) stripped.push_back(k & mask);
      rle(stripped, tab.keys, tab.counts);
    }

    // context aggregates; contexts arrive in sorted order because the word
    // occupies the low bits
    for (size_t i = 0; i < tab.keys.size(); ++i) {
      Key ctx = tab.keys[i] >> kBits;
      if (tab.ctx_keys.empty() || tab.ctx_keys.back() != ctx) {
        tab.ctx_keys.push_back(ctx);
        tab.ctx_total.push_back(0.0);
        tab.ctx_distinct.push_back(0);
      }
      tab.ctx_total.back() += tab.counts[i];
      if (tab.counts[i] > 0.0) ++tab.ctx_distinct.back();
    }

    long n1 = 0, n2 = 0;
    for (double c : tab.counts) {
      if (c == 1.0) ++n1;
      else if (c == 2.0) ++n2;
    }
    tab.discount = (n1 + 2 * n2) > 0 ? static_cast<double>(n1) / (n1 + 2.0 * n2) : 0.0;
  }
  return m;
}

double KNModel::prob_rec(long n, const std::vector<WordId>& padded_ctx, WordId word) const {
  if (n == 0) return 1.0 / static_cast<double>(vocab_size_ - 1);  // uniform, <S> excluded
  const OrderTable& tab = orders_[static_cast<size_t>(n - 1)];
  Key ctx = 0;
  for (long t = 0; t < n - 1; ++t) {
    WordId id = padded_ctx[padded_ctx.size() - static_cast<size_t>(n - 1) +
                           static_cast<size_t>(t)];
    ctx = (ctx << kBits) | static_cast<Key>(id);
  }
  double total = 0.0;
  long distinct = 0;
  if (!tab.context_of(ctx, total, distinct) || total <= 0.0)
    return prob_rec(n - 1, padded_ctx, word);  // unseen context: pure backoff
  Key gram = (ctx << kBits) | static_cast<Key>(word);
  double c = tab.count_of(gram);
  double d = tab.discount;
  double direct = std::max(c - d, 0.0) / total;
  double lambda = d * static_cast<double>(distinct) / total;
  return direct + lambda * prob_rec(n - 1, padded_ctx, word);
}

double KNModel::prob(const std::vector<WordId>& context, WordId word) const {
  if (word < 0 || word >= vocab_size_)
    throw std::out_of_range("kn_logprob: word id out of range");
  std::vector<WordId> padded(static_cast<size_t>(order_ - 1), Vocabulary::kBos);
  long have = std::min<long>(static_cast<long>(context.size()), order_ - 1);
  for (long i = 0; i < have; ++i)
    padded[static_cast<size_t>(order_ - 1 - have + i)] =
        context[context.size() - static_cast<size_t>(have) + static_cast<size_t>(i)];
  return prob_rec(order_, padded, word);
}

double KNModel::logprob(const std::vector<WordId>& context, WordId word) const {
  return std::log(prob(context, word));
}

void KNModel::export_counts(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "order\t" << order_ << "\nvocab\t" << vocab_size_ << "\n";
  Key mask = (Key(1) << kBits) - 1;
  for (long n = 1; n <= order_; ++n) {
    const OrderTable& tab = orders_[static_cast<size_t>(n - 1)];
    out << "\\" << n << "-grams: discount=" << tab.discount << "\n";
    for (size_t i = 0; i < tab.keys.size(); ++i) {
      Key k = tab.keys[i];
      std::vector<long> ids(static_cast<size_t>(n));
      for (long t = n - 1; t >= 0; --t) {
        ids[static_cast<size_t>(t)] = static_cast<long>(k & mask);
        k >>= kBits;
      }
      for (long t = 0; t < n; ++t) out << ids[static_cast<size_t>(t)] << (t + 1 < n ? ' ' : '\t');
      out << tab.counts[i] << "\n";
    }
  }
}

void KNModel::save(const std::string& path) const {
  SectionWriter w;
  w.add_string("kn.kind", "interpolated-kn");
  w.add_u64("kn.order", static_cast<uint64_t>(order_));
  w.add_u64("kn.vocab", static_cast<uint64_t>(vocab_size_));
  for (long n = 1; n <= order_; ++n) {
    const OrderTable& tab = orders_[static_cast<size_t>(n - 1)];
    std::string pre = "kn.o" + std::to_string(n) + ".";
    std::vector<uint8_t> kb(tab.keys.size() * sizeof(Key));
    std::memcpy(kb.data(), tab.keys.data(), kb.size());
    w.add(pre + "keys", std::move(kb));
    w.add_doubles(pre + "counts", tab.counts);
    std::vector<uint8_t> cb(tab.ctx_keys.size() * sizeof(Key));
    std::memcpy(cb.data(), tab.ctx_keys.data(), cb.size());
    w.add(pre + "ctx_keys", std::move(cb));
    w.add_doubles(pre + "ctx_total", tab.ctx_total);
    std::vector<double> dist(tab.ctx_distinct.begin(), tab.ctx_distinct.end());
    w.add_doubles(pre + "ctx_distinct", dist);
    std::vector<double> d = {tab.discount};
    w.add_doubles(pre + "discount", d);
  }
  w.write(path);
}

KNModel KNModel::load(const std::string& path) {
  SectionReader r(path);
  if (r.get_string("kn.kind") != "interpolated-kn")
    throw std::runtime_error("KNModel::load: not an n-gram checkpoint");
  KNModel m;
  m.order_ = static_cast<long>(r.get_u64("kn.order"));
  m.vocab_size_ = static_cast<long>(r.get_u64("kn.vocab"));
  m.orders_.resize(static_cast<size_t>(m.order_));
  for (long n = 1; n <= m.order_; ++n) {
    OrderTable& tab = m.orders_[static_cast<size_t>(n - 1)];
    std::string pre = "kn.o" + std::to_string(n) + ".";
    const auto& kb = r.raw(pre + "keys");
    tab.keys.resize(kb.size() / sizeof(Key));
    std::memcpy(tab.keys.data(), kb.data(), kb.size());
    tab.counts = r.get_doubles(pre + "counts");
    const auto& cb = r.raw(pre + "ctx_keys");
    tab.ctx_keys.resize(cb.size() / sizeof(Key));
    std::memcpy(tab.ctx_keys.data(), cb.data(), cb.size());
    tab.ctx_total = r.get_doubles(pre + "ctx_total");
    auto dist = r.get_doubles(pre + "ctx_distinct");
    tab.ctx_distinct.assign(dist.begin(), dist.end());
    tab.discount = r.get_doubles(pre + "discount").at(0);
  }
  return m;
}

}  // namespace lmkit
