#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "srcsel/common.hpp"
#include "srcsel/corpus.hpp"

using namespace srcsel;
using srcsel::testing::dataset;
using srcsel::testing::TempDir;
using srcsel::testing::write_text;

namespace {

std::vector<std::string> labels_of(const Sentence& s) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens) out.push_back(t.label);
  return out;
}

std::vector<Sentence> numbered(std::size_t n) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Sentence{{Token{"s" + std::to_string(i), "O"}}});
  return out;
}

}  // namespace

TEST_CASE("parse_conll reads tab-separated sentences", "[corpus]") {
  const auto s = parse_conll("the\tO\nBosch\tB-ORG\n\n");
  REQUIRE(s.size() == 1);
  REQUIRE(s[0].size() == 2);
  REQUIRE(labels_of(s[0]) == std::vector<std::string>{"O", "B-ORG"});
  REQUIRE(s[0].tokens[1].text == "Bosch");
}

TEST_CASE("parse_conll edge cases", "[corpus]") {
  REQUIRE(parse_conll("").empty());
  const auto unterminated = parse_conll("a\tO\nb\tO");
  REQUIRE(unterminated.size() == 1);
  REQUIRE(unterminated[0].size() == 2);

  const auto spaced = parse_conll("-DOCSTART- -X- O\n\nEU  NNP  B-ORG\nrejects VBZ O\n\n\n\nx O\n");
  REQUIRE(spaced.size() == 2);
  REQUIRE(spaced[0].tokens[0].text == "EU");
  REQUIRE(spaced[0].tokens[0].label == "B-ORG");

  const auto crlf = parse_conll("a\tO\r\nb\tB-PER\r\n");
  REQUIRE(crlf[0].tokens[1].label == "B-PER");
}

TEST_CASE("parse_conll reports malformed lines with their number", "[corpus]") {
  try {
    parse_conll("a\tO\n\nlonely\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    REQUIRE(e.line() == 3);
  }
  REQUIRE_THROWS_AS(parse_conll("a\tO\nb\t\n"), ParseError);
}

TEST_CASE("parse_conll rejects invalid UTF-8", "[corpus]") {
  try {
    parse_conll("ok\tO\n\xff\xfe\tO\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    REQUIRE(e.line() == 2);
  }
  REQUIRE_THROWS_AS(parse_conll("trunc\xe2\x82\tO\n"), ParseError);
  REQUIRE(parse_conll("Zürich\tB-LOC\n€\tO\n")[0].tokens[0].text == "Zürich");
}

TEST_CASE("orphan I- tags are repaired or rejected", "[corpus]") {
  const auto repaired = parse_conll("a\tO\nb\tI-PER\nc\tI-PER\nd\tI-LOC\n");
  REQUIRE(labels_of(repaired[0]) == std::vector<std::string>{"O", "B-PER", "I-PER", "B-LOC"});
  REQUIRE_THROWS_AS(parse_conll("a\tO\nb\tI-PER\n", ParseOptions{true}), ParseError);
  REQUIRE_NOTHROW(parse_conll("a\tB-PER\nb\tI-PER\n", ParseOptions{true}));
}

TEST_CASE("serialize and parse round trip on random sentences", "[corpus][property]") {
  Rng rng(5);
  const std::vector<std::string> words{"alpha", "Beta", "gamma", "Ünï", "x1", "9:30"};
  const std::vector<std::string> labels{"O", "B-PER", "I-PER", "B-LOC", "NOUN"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sentence> sentences;
    for (std::size_t s = 0, n = 1 + rng.below(5); s < n; ++s) {
      Sentence sentence;
      std::string previous = "O";
      for (std::size_t t = 0, len = 1 + rng.below(6); t < len; ++t) {
        std::string label = labels[rng.below(labels.size())];
        if (label == "I-PER" && previous != "B-PER" && previous != "I-PER") label = "B-PER";
        sentence.tokens.push_back(Token{words[rng.below(words.size())], label});
        previous = label;
      }
      sentences.push_back(sentence);
    }
    REQUIRE(parse_conll(serialize_conll(sentences)) == sentences);
  }
}

TEST_CASE("split fallback follows the floor rule with one sentence minimum", "[corpus]") {
  Splits only_train{numbered(100), {}, {}};
  const auto s = apply_split_fallback(only_train, false, false);
  REQUIRE(s.train.size() == 72);
  REQUIRE(s.dev.size() == 8);
  REQUIRE(s.test.size() == 20);
  REQUIRE(s.test.front().tokens[0].text == "s80");
  REQUIRE(s.dev.front().tokens[0].text == "s72");

  const auto small = apply_split_fallback(Splits{numbered(10), {}, {}}, false, false);
  REQUIRE(small.train.size() == 7);
  REQUIRE(small.dev.size() == 1);
  REQUIRE(small.test.size() == 2);

  Splits complete{numbered(10), numbered(2), numbered(3)};
  const auto unchanged = apply_split_fallback(complete, true, true);
  REQUIRE(unchanged.train.size() == 10);
  REQUIRE(unchanged.dev.size() == 2);
  REQUIRE(unchanged.test.size() == 3);

  REQUIRE_THROWS_AS(apply_split_fallback(Splits{numbered(2), {}, {}}, false, false), ConfigError);
}

TEST_CASE("split fallback preserves order and count", "[corpus][property]") {
  for (std::size_t n = 3; n <= 60; ++n) {
    for (int mode = 0; mode < 3; ++mode) {
      const bool has_dev = mode == 1;
      const bool has_test = mode == 2;
      Splits in{numbered(n), has_dev ? numbered(1) : std::vector<Sentence>{}, has_test ? numbered(1) : std::vector<Sentence>{}};
      const auto out = apply_split_fallback(in, has_dev, has_test);
      REQUIRE(!out.train.empty());
      REQUIRE(!out.dev.empty());
      REQUIRE(!out.test.empty());
      std::vector<Sentence> joined = out.train;
      if (!has_dev) joined.insert(joined.end(), out.dev.begin(), out.dev.end());
      if (!has_test) joined.insert(joined.end(), out.test.begin(), out.test.end());
      REQUIRE(joined == numbered(n));
      REQUIRE(apply_split_fallback(in, has_dev, has_test).train == out.train);
    }
  }
}

TEST_CASE("vocabularies", "[corpus]") {
  const auto d = dataset("d", "NER", {"a/O b/O a/O", "A/B-PER the/O"}, {"dev/O"}, {"test/O"});
  REQUIRE(vocabulary(d) == std::set<std::string>{"a", "b", "A", "the"});
  REQUIRE(vocabulary(d, {true, true, true}).count("dev") == 1);
  REQUIRE(vocabulary(d, {false, false, false}).empty());
  REQUIRE(vocabulary(d, {}, TextOptions{true}) == std::set<std::string>{"a", "b", "the"});

  const auto bosch = dataset("b", "NER", {"Bosch/B-ORG the/O"});
  REQUIRE(annotated_vocabulary(bosch) == std::set<std::string>{"Bosch"});
  REQUIRE(annotated_vocabulary(dataset("o", "NER", {"a/O b/O"})).empty());
  const auto pos = dataset("p", "POS", {"dogs/NOUN run/VERB"});
  REQUIRE(annotated_vocabulary(pos) == vocabulary(pos));
}

TEST_CASE("vocabulary contains the annotated vocabulary", "[corpus][property]") {
  Rng rng(2);
  const std::vector<std::string> labels{"O", "B-PER", "B-LOC"};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::string> train;
    for (int s = 0; s < 4; ++s) {
      std::string line;
      for (int t = 0; t < 5; ++t) line += "w" + std::to_string(rng.below(12)) + "/" + labels[rng.below(3)] + " ";
      train.push_back(line);
    }
    const auto d = dataset("r", "NER", train);
    const auto v = vocabulary(d);
    for (const auto& w : annotated_vocabulary(d)) REQUIRE(v.count(w) == 1);
  }
}

TEST_CASE("term distributions", "[corpus]") {
  const auto three = term_distribution(dataset("t", "NER", {"a/O a/O b/O"}));
  REQUIRE(three.probs.at("a") == Catch::Approx(2.0 / 3.0));
  REQUIRE(three.probs.at("b") == Catch::Approx(1.0 / 3.0));
  REQUIRE(term_distribution(dataset("u", "NER", {"a/O"})).probs.at("a") == 1.0);

  const auto d = dataset("ten", "NER", {"a/O b/O c/O d/O a/O", "b/O a/O c/O a/O a/O"});
  const auto dist = term_distribution(d);
  double total = 0.0;
  std::set<std::string> support;
  for (const auto& [term, p] : dist.probs) {
    total += p;
    REQUIRE(p > 0.0);
    support.insert(term);
  }
  REQUIRE(dist.probs.size() == 4);
  REQUIRE(std::abs(total - 1.0) < 1e-9);
  REQUIRE(support == vocabulary(d));
}

TEST_CASE("datasets need non-empty splits and collect labels", "[corpus]") {
  REQUIRE_THROWS_AS(make_dataset("e", "NER", "x", Splits{}), ConfigError);
  const auto d = dataset("d", "NER", {"a/B-PER b/O"}, {"c/B-LOC"}, {"d/O"});
  REQUIRE(d.label_set == std::set<std::string>{"B-LOC", "B-PER"});
  REQUIRE(is_span_task(d));
  REQUIRE_FALSE(is_span_task(dataset("p", "POS", {"a/NOUN"})));
}

TEST_CASE("manifests resolve paths and report problems", "[corpus]") {
  TempDir dir;
  write_text(dir / "a.train", "x\tB-PER\ny\tO\n\nz\tO\n");
  write_text(dir / "a.dev", "x\tO\n");
  write_text(dir / "a.test", "y\tB-PER\n");
  std::string sentences_text;
  for (int i = 0; i < 10; ++i) sentences_text += "w" + std::to_string(i) + "\tO\n\n";
  write_text(dir / "b.train", sentences_text);
  write_text(dir / "manifest.tsv", "# id task domain train dev test\na NER news a.train a.dev a.test\nb NER web b.train\n");

  const auto datasets = load_manifest(dir / "manifest.tsv");
  REQUIRE(datasets.size() == 2);
  REQUIRE(datasets[0].splits.train.size() == 2);
  REQUIRE(datasets[1].splits.train.size() == 7);
  REQUIRE(datasets[1].splits.dev.size() == 1);
  REQUIRE(datasets[1].splits.test.size() == 2);

  REQUIRE_THROWS_AS(parse_manifest("a NER news\n", dir.path()), ParseError);
  REQUIRE_THROWS_AS(parse_manifest("a NER n x\na NER n y\n", dir.path()), ParseError);

  write_text(dir / "broken.tsv", "c NER news missing.train\n");
  try {
    load_manifest(dir / "broken.tsv");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    REQUIRE(std::string(e.what()).find("'c'") != std::string::npos);
  }
}
