#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "srcsel/common.hpp"
#include "srcsel/synth.hpp"

using namespace srcsel;

namespace {

std::set<std::string> labels_in(const std::vector<Sentence>& split) {
  std::set<std::string> out;
  for (const auto& s : split) {
    for (const auto& t : s.tokens) {
      if (t.label != "O") out.insert(t.label);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("the default suite", "[synth]") {
  const auto specs = default_suite();
  REQUIRE(specs.size() == 9);
  std::set<std::string> tasks, domains, ids;
  for (const auto& s : specs) {
    tasks.insert(s.task);
    domains.insert(s.domain);
    ids.insert(s.id);
  }
  REQUIRE(tasks == std::set<std::string>{"NER", "POS", "TIME"});
  REQUIRE(domains.size() == 6);
  REQUIRE(ids.size() == 9);
}

TEST_CASE("synthesis is deterministic and seed-dependent", "[synth]") {
  const auto spec = default_suite()[0];
  const auto a = synthesize(spec);
  const auto b = synthesize(spec);
  REQUIRE(serialize_conll(a.splits.train) == serialize_conll(b.splits.train));
  REQUIRE(serialize_conll(a.splits.test) == serialize_conll(b.splits.test));
  auto other = spec;
  other.seed += 1;
  REQUIRE(serialize_conll(synthesize(other).splits.train) != serialize_conll(a.splits.train));
}

TEST_CASE("every split covers every label of its task", "[synth]") {
  for (const auto& spec : default_suite(3)) {
    const auto d = synthesize(spec);
    REQUIRE(d.splits.train.size() == spec.train);
    REQUIRE(d.splits.dev.size() == spec.dev);
    REQUIRE(d.splits.test.size() == spec.test);
    for (const auto* split : {&d.splits.train, &d.splits.dev, &d.splits.test}) {
      REQUIRE(labels_in(*split) == d.label_set);
    }
    REQUIRE(is_span_task(d) == (spec.task != "POS"));
  }
}

TEST_CASE("nearby domains share more vocabulary", "[synth]") {
  SynthSpec base{"a", "NER", "d0", 0.0};
  base.train = 200;
  auto near = base;
  near.id = "b";
  near.angle = 0.3;
  auto far = base;
  far.id = "c";
  far.angle = 3.0;
  const auto va = vocabulary(synthesize(base));
  auto shared = [&](const SynthSpec& s) {
    const auto v = vocabulary(synthesize(s));
    std::size_t n = 0;
    for (const auto& w : v) n += va.count(w);
    return static_cast<double>(n) / static_cast<double>(v.size());
  };
  REQUIRE(shared(near) > shared(far));
}

TEST_CASE("written suites load back through the manifest", "[synth]") {
  srcsel::testing::TempDir dir;
  auto specs = default_suite();
  specs.resize(3);
  const auto manifest = write_suite(dir.path(), specs);
  const auto loaded = load_manifest(manifest);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto expected = synthesize(specs[i]);
    REQUIRE(loaded[i].id == specs[i].id);
    REQUIRE(loaded[i].task == specs[i].task);
    REQUIRE(serialize_conll(loaded[i].splits.dev) == serialize_conll(expected.splits.dev));
  }
}
