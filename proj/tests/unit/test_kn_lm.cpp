#include <catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"
#include "srcsel/common.hpp"
#include "srcsel/kn_lm.hpp"

using namespace srcsel;
using srcsel::testing::dataset;
using srcsel::testing::sentences;

namespace {

double sum_over_vocabulary(const NGramLM& lm, const std::vector<std::string>& context) {
  double total = 0.0;
  for (const auto& w : lm.predictable_vocabulary()) total += lm.prob(context, w);
  return total;
}

// Perplexity recomputed from prob() by walking each sentence with the padded history.
double perplexity_by_products(const NGramLM& lm, const std::vector<Sentence>& text) {
  double log_sum = 0.0;
  double events = 0.0;
  for (const auto& s : text) {
    std::vector<std::string> history(static_cast<std::size_t>(lm.order() - 1), "<s>");
    std::vector<std::string> words;
    for (const auto& t : s.tokens) words.push_back(t.text);
    words.push_back("</s>");
    for (const auto& w : words) {
      log_sum += std::log(lm.prob(history, w));
      events += 1.0;
      history.push_back(w);
    }
  }
  return std::exp(-log_sum / events);
}

std::vector<Sentence> random_corpus(Rng& rng, const std::string& prefix, std::size_t vocab) {
  std::vector<std::string> lines;
  for (std::size_t s = 0, n = 2 + rng.below(4); s < n; ++s) {
    std::string line;
    for (std::size_t t = 0, len = 2 + rng.below(6); t < len; ++t) line += prefix + std::to_string(rng.below(vocab)) + "/O ";
    lines.push_back(line);
  }
  return sentences(lines);
}

}  // namespace

TEST_CASE("conditional distributions sum to one", "[lm][property]") {
  Rng rng(9);
  const auto corpus = random_corpus(rng, "w", 8);
  const auto lm = NGramLM::train(corpus);
  auto words = lm.predictable_vocabulary();
  words.push_back("<s>");
  words.push_back("never-seen");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> context;
    for (std::size_t i = 0, len = rng.below(6); i < len; ++i) context.push_back(words[rng.below(words.size())]);
    REQUIRE(std::abs(sum_over_vocabulary(lm, context) - 1.0) < 1e-6);
  }
}

TEST_CASE("bigram statistics favor the observed continuation", "[lm]") {
  const auto lm = NGramLM::train(sentences({"a/O b/O a/O b/O"}));
  const std::vector<std::string> a{"a"};
  REQUIRE(lm.prob(a, "b") > lm.prob(a, "a"));
}

TEST_CASE("uniform unigram model has perplexity equal to its vocabulary size", "[lm]") {
  LmOptions options;
  options.order = 1;
  options.discount = 1.0;
  const auto text = sentences({"a/O b/O c/O"});
  const auto lm = NGramLM::train(text, options);
  REQUIRE(lm.predictable_size() == 5);
  REQUIRE(lm.perplexity(text) == Catch::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("perplexity equals the product of conditional probabilities", "[lm][property]") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto train = random_corpus(rng, "w", 6);
    const auto test = random_corpus(rng, "w", 9);
    const auto lm = NGramLM::train(train);
    REQUIRE(lm.perplexity(test) == Catch::Approx(perplexity_by_products(lm, test)).epsilon(1e-9));
  }
}

TEST_CASE("degenerate inputs", "[lm]") {
  const auto lm = NGramLM::train(sentences({"only/O"}));
  const double self = lm.perplexity(sentences({"only/O"}));
  REQUIRE(std::isfinite(self));
  REQUIRE(self > 0.0);
  const double oov = lm.perplexity(sentences({"zzz/O yyy/O"}));
  REQUIRE(std::isfinite(oov));
  REQUIRE(oov > self);
  REQUIRE_THROWS_AS(NGramLM::train(std::vector<Sentence>{}), ConfigError);
  REQUIRE_THROWS_AS(lm.perplexity(std::vector<Sentence>{}), ConfigError);
  LmOptions bad;
  bad.discount = 0.0;
  REQUIRE_THROWS_AS(NGramLM::train(sentences({"a/O"}), bad), ConfigError);
}

TEST_CASE("in-domain text is less perplexing than disjoint text", "[lm][property]") {
  Rng rng(33);
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto own = random_corpus(rng, "a", 5);
    const auto other = random_corpus(rng, "b", 5);
    const auto lm = NGramLM::train(own);
    if (lm.perplexity(own) < lm.perplexity(other)) ++wins;
  }
  REQUIRE(wins >= 95);
}

TEST_CASE("dataset-level helpers use the train split", "[lm]") {
  const auto source = dataset("s", "NER", {"a/O b/O"}, {"q/O"}, {"r/O"});
  const auto lm = train_kn_lm(source);
  REQUIRE(lm.order() == 5);
  REQUIRE(perplexity(lm, source) < perplexity(lm, source, SplitName::Test));
}
