#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lmkit/corpus.hpp"
#include "lmkit/ngram.hpp"
#include "lmkit/prng.hpp"

using namespace lmkit;

namespace {

// sum of p(w | context) over the support (all ids except <S>)
double context_mass(const KNModel& m, const std::vector<WordId>& ctx) {
  double s = 0;
  for (WordId w = 0; w < m.vocab_size(); ++w)
    if (w != Vocabulary::kBos) s += m.prob(ctx, w);
  return s;
}

}  // namespace

// corpus "a a a", order 1: unigram counts a:3 </S>:1, so n1=1, n2=0 and the
// discount is 1. direct(a) = (3-1)/4, lambda = 1*2/4, uniform base 1/3 over
// {UNK, </S>, a}: p(a) = 1/2 + 1/6 = 2/3, p(</S>) = p(UNK) = 1/6.
TEST_CASE("hand-computed KN: unigram model on 'a a a'") {
  Vocabulary v = Vocabulary::build({{"a", "a", "a"}}, 10);
  KNModel m = KNModel::train({v.encode({"a", "a", "a"})}, 1, v.size());
  CHECK(m.discount(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.prob({}, v.lookup("a")) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(m.prob({}, Vocabulary::kEos) == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
  CHECK(m.prob({}, Vocabulary::kUnk) == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
  CHECK(context_mass(m, {}) == doctest::Approx(1.0).epsilon(1e-9));
}

// corpus "a b a b", order 2. raw bigrams: (<S>,a):1 (a,b):2 (b,a):1 (b,</S>):1
// so D2 = 3/(3+2) = 0.6; continuation unigrams a:2 b:1 </S>:1 give D1 = 0.5.
// p1(b) = (1-0.5)/4 + 0.5*(3/4)*(1/4) = 0.21875
// p(b|a) = (2-0.6)/2 + 0.6*(1/2)*p1(b) = 0.765625
// p(a|b) = (1-0.6)/2 + 0.6*(2/2)*p1(a), p1(a) = 1.5/4 + 0.09375 = 0.46875
// p(</S>|b) = 0.2 + 0.6*p1(</S>), p1(</S>) = 0.125 + 0.09375 = 0.21875
TEST_CASE("hand-computed KN: bigram model on 'a b a b'") {
  Vocabulary v = Vocabulary::build({{"a", "b", "a", "b"}}, 10);
  WordId a = v.lookup("a"), b = v.lookup("b");
  KNModel m = KNModel::train({v.encode({"a", "b", "a", "b"})}, 2, v.size());
  CHECK(m.discount(2) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(m.discount(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.prob({a}, b) == doctest::Approx(0.765625).epsilon(1e-9));
  CHECK(m.prob({b}, a) == doctest::Approx(0.48125).epsilon(1e-9));
  CHECK(m.prob({b}, Vocabulary::kEos) == doctest::Approx(0.33125).epsilon(1e-9));
  CHECK(context_mass(m, {a}) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(context_mass(m, {b}) == doctest::Approx(1.0).epsilon(1e-9));
}

// corpus {"a b", "a c"}, order 3, vocabulary {UNK,<S>,</S>,a,b,c}.
// raw trigrams: (<S>,<S>,a):2, (<S>,a,b):1, (<S>,a,c):1, (a,b,</S>):1,
// (a,c,</S>):1 -> D3 = 4/(4+2) = 2/3.
// continuation bigrams (one each): D2 = 1. continuation unigrams a:1 b:1 c:1
// </S>:2 -> D1 = 3/5; uniform base 1/5.
// p1(b) = (1-0.6)/5 + 0.6*(4/5)*(1/5) = 0.176
// p(b | <S> a) = (1-2/3)/2 + (2/3)*(2/2)*p2, p2(b|a)=0+1*p1(b) -> 0.284
// p(</S> | a b) = (1-2/3)/1 + (2/3)*p2(</S>|b), p2 = 0+1*p1(</S>),
//   p1(</S>) = (2-0.6)/5 + 0.12*... = 0.28+0.096 = 0.376 -> 0.584
TEST_CASE("hand-computed KN: trigram model on two sentences") {
  Vocabulary v = Vocabulary::build({{"a", "b"}, {"a", "c"}}, 10);
  WordId a = v.lookup("a"), b = v.lookup("b");
  KNModel m =
      KNModel::train({v.encode({"a", "b"}), v.encode({"a", "c"})}, 3, v.size());
  CHECK(m.discount(3) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.discount(2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.discount(1) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(m.prob({Vocabulary::kBos, a}, b) == doctest::Approx(0.284).epsilon(1e-9));
  CHECK(m.prob({a, b}, Vocabulary::kEos) == doctest::Approx(0.584).epsilon(1e-9));
  CHECK(context_mass(m, {Vocabulary::kBos, a}) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(context_mass(m, {a, b}) == doctest::Approx(1.0).epsilon(1e-9));

  // unseen context backs off purely to the lower order
  WordId c = v.lookup("c");
  CHECK(m.prob({c, a}, b) == doctest::Approx(0.176).epsilon(1e-9));
}

TEST_CASE("short context equals <S>-padded context") {
  Vocabulary v = Vocabulary::build({{"a", "b"}, {"a", "c"}}, 10);
  WordId a = v.lookup("a"), b = v.lookup("b");
  KNModel m =
      KNModel::train({v.encode({"a", "b"}), v.encode({"a", "c"})}, 3, v.size());
  CHECK(m.prob({a}, b) == m.prob({Vocabulary::kBos, a}, b));
}

TEST_CASE("empty corpus and tiny corpora are rejected") {
  CHECK_THROWS(KNModel::train({}, 2, 5));
}

TEST_CASE("uniform corpus gives near-uniform probabilities") {
  Vocabulary v = Vocabulary::build({{"a"}, {"b"}, {"c"}, {"d"}}, 10);
  std::vector<SentenceIds> enc;
  for (std::string w : std::vector<std::string>{"a", "b", "c", "d"}) enc.push_back(v.encode({w}));
  KNModel m = KNModel::train(enc, 2, v.size());
  double pa = m.prob({Vocabulary::kBos}, v.lookup("a"));
  for (std::string w : std::vector<std::string>{"b", "c", "d"})
    CHECK(m.prob({Vocabulary::kBos}, v.lookup(w)) == doctest::Approx(pa).epsilon(1e-12));
}

TEST_CASE("per-context normalization over 100 random corpora") {
  Rng rng(2027);
  for (int trial = 0; trial < 100; ++trial) {
    long vocab_words = 2 + static_cast<long>(rng.below(6));
    long n_sent = 1 + static_cast<long>(rng.below(6));
    std::vector<Sentence> sents;
    for (long s = 0; s < n_sent; ++s) {
      long len = 3 + static_cast<long>(rng.below(4));
      Sentence sent;
      for (long t = 0; t < len; ++t)
        sent.push_back(std::string(1, static_cast<char>('a' + rng.below(static_cast<uint64_t>(vocab_words)))));
      sents.push_back(sent);
    }
    Vocabulary v = Vocabulary::build(sents, 40);
    std::vector<SentenceIds> enc;
    for (const auto& s : sents) enc.push_back(v.encode(s));
    long order = 1 + static_cast<long>(rng.below(4));
    KNModel m = KNModel::train(enc, order, v.size());

    // a handful of random contexts, seen and unseen
    for (int q = 0; q < 4; ++q) {
      std::vector<WordId> ctx;
      long clen = static_cast<long>(rng.below(static_cast<uint64_t>(order)));
      for (long t = 0; t < clen; ++t) ctx.push_back(static_cast<WordId>(rng.below(static_cast<uint64_t>(v.size()))));
      CHECK(context_mass(m, ctx) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("KN model save/load round-trips queries exactly") {
  Vocabulary v = Vocabulary::build({{"a", "b", "a", "c"}}, 10);
  KNModel m = KNModel::train({v.encode({"a", "b", "a", "c"})}, 3, v.size());
  std::string path = "/tmp/lmkit_test_kn.ckpt";
  m.save(path);
  KNModel m2 = KNModel::load(path);
  for (WordId w = 0; w < v.size(); ++w) {
    CHECK(m.prob({v.lookup("a")}, w) == m2.prob({v.lookup("a")}, w));
    CHECK(m.prob({}, w) == m2.prob({}, w));
  }
}
