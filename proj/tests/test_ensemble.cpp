#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lmkit/ensemble.hpp"

using namespace lmkit;

namespace {

ProbCache make_cache(std::vector<std::vector<double>> probs) {
  ProbCache c;
  c.probs = std::move(probs);
  c.targets.assign(c.probs.size(), 3);
  return c;
}

}  // namespace

TEST_CASE("two-member hand mixture: 0.5*0.8 + 0.5*0.2 = 0.5") {
  ProbCache c = make_cache({{0.8, 0.2}});
  CHECK(mixture_loglik(c, {0.5, 0.5}) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("single member with weight 1 reproduces its perplexity") {
  ProbCache c = make_cache({{0.5}, {0.25}, {0.125}});
  CHECK(mixture_perplexity(c, {1.0}) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("two identical members leave perplexity unchanged for any weights") {
  ProbCache c = make_cache({{0.5, 0.5}, {0.25, 0.25}, {0.125, 0.125}});
  CHECK(mixture_perplexity(c, {0.5, 0.5}) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(mixture_perplexity(c, {0.9, 0.1}) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("mixture scorer rejects bad weights") {
  CHECK_THROWS(MixtureScorer({}, {}, 10));
  CHECK_THROWS(MixtureScorer({nullptr}, {0.7}, 10));          // does not sum to 1
  CHECK_THROWS(MixtureScorer({nullptr, nullptr}, {1.5, -0.5}, 10));  // negative
}

TEST_CASE("EM drives the weight of a dominating member toward 1") {
  // member 0 is strictly better on every token
  std::vector<std::vector<double>> probs;
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    double p = rng.uniform(0.2, 0.6);
    probs.push_back({p, p * 0.25});
  }
  ProbCache c = make_cache(std::move(probs));
  EMTrace t = optimize_weights(c);
  CHECK(t.weights[0] > 1.0 - 1e-3);
}

TEST_CASE("EM leaves identical members at uniform weights") {
  ProbCache c = make_cache({{0.3, 0.3}, {0.5, 0.5}, {0.2, 0.2}});
  EMTrace t = optimize_weights(c);
  CHECK(t.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.weights[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("EM is monotone and beats equal weights") {
  Rng rng(11);
  std::vector<std::vector<double>> probs;
  for (int i = 0; i < 300; ++i) {
    // member strengths vary by token so the optimum is interior
    double a = rng.uniform(0.05, 0.5), b = rng.uniform(0.05, 0.5), c = rng.uniform(0.05, 0.5);
    probs.push_back({a, b, c});
  }
  ProbCache cache = make_cache(std::move(probs));
  EMTrace t = optimize_weights(cache);
  for (size_t i = 1; i < t.loglik_per_iter.size(); ++i)
    CHECK(t.loglik_per_iter[i] >= t.loglik_per_iter[i - 1] - 1e-12);
  std::vector<double> equal(3, 1.0 / 3.0);
  CHECK(mixture_perplexity(cache, t.weights) <= mixture_perplexity(cache, equal) + 1e-12);
  double sum = t.weights[0] + t.weights[1] + t.weights[2];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a member that assigns zero everywhere is rejected") {
  ProbCache c = make_cache({{0.5, 0.0}, {0.25, 0.0}});
  CHECK_THROWS(optimize_weights(c));
}

TEST_CASE("probability cache round-trips through disk") {
  ProbCache c;
  c.probs = {{0.5, 0.1}, {0.25, 0.9}, {0.125, 0.3}};
  c.targets = {3, 4, 2};
  std::string path = "/tmp/lmkit_test_cache.bin";
  c.save(path);
  ProbCache d = ProbCache::load(path);
  CHECK(d.targets == c.targets);
  REQUIRE(d.tokens() == c.tokens());
  REQUIRE(d.members() == c.members());
  for (long i = 0; i < c.tokens(); ++i)
    for (long j = 0; j < c.members(); ++j)
      CHECK(d.probs[static_cast<size_t>(i)][static_cast<size_t>(j)] ==
            c.probs[static_cast<size_t>(i)][static_cast<size_t>(j)]);
}
