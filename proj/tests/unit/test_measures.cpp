#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "srcsel/common.hpp"
#include "srcsel/measures.hpp"

using namespace srcsel;
using srcsel::testing::dataset;

namespace {

TermDistribution dist(std::map<std::string, double> probs) { return TermDistribution{std::move(probs)}; }

}  // namespace

TEST_CASE("vocabulary overlap", "[measures]") {
  const auto target = dataset("t", "NER", {"a/O b/O c/O d/O"});
  const auto source = dataset("s", "NER", {"a/O b/O e/O"});
  REQUIRE(vocab_overlap(source, target) == Catch::Approx(50.0));
  REQUIRE(vocab_overlap(target, target) == 100.0);
  REQUIRE(vocab_overlap(dataset("x", "NER", {"q/O"}), target) == 0.0);
  REQUIRE(vocab_overlap(target, source) == Catch::Approx(200.0 / 3.0));
}

TEST_CASE("annotation overlap", "[measures]") {
  const auto target = dataset("t", "NER", {"x/B-PER y/B-LOC z/O"});
  const auto source = dataset("s", "NER", {"y/B-PER x/O"});
  REQUIRE(annotation_overlap(source, target) == Catch::Approx(50.0));
  REQUIRE(annotation_overlap(target, target) == 100.0);
  REQUIRE_THROWS_AS(annotation_overlap(source, dataset("o", "NER", {"a/O"})), ConfigError);
}

TEST_CASE("dataset size counts train sentences", "[measures]") {
  std::vector<std::string> twenty(20, "w/O");
  REQUIRE(dataset_size(dataset("d", "NER", twenty)) == 20);
}

TEST_CASE("Jensen-Shannon divergence", "[measures]") {
  const auto p = dist({{"a", 0.3}, {"b", 0.7}});
  REQUIRE(jsd(p, p) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(jsd(dist({{"a", 1.0}}), dist({{"b", 1.0}})) == Catch::Approx(1.0));
  REQUIRE(jsd(dist({{"a", 1.0}}), dist({{"a", 0.5}, {"b", 0.5}})) == Catch::Approx(0.3113).margin(1e-3));
}

TEST_CASE("JSD is symmetric and bounded", "[measures][property]") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, double> a, b;
    double sa = 0.0, sb = 0.0;
    for (int i = 0; i < 6; ++i) {
      if (rng.uniform() < 0.7) sa += a["w" + std::to_string(i)] = rng.uniform() + 0.01;
      if (rng.uniform() < 0.7) sb += b["w" + std::to_string(i)] = rng.uniform() + 0.01;
    }
    if (a.empty() || b.empty()) continue;
    for (auto& [k, v] : a) v /= sa;
    for (auto& [k, v] : b) v /= sb;
    const double ab = jsd(dist(a), dist(b));
    REQUIRE(ab == Catch::Approx(jsd(dist(b), dist(a))).margin(1e-12));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 1.0 + 1e-12);
  }
}

TEST_CASE("cosine distance", "[measures]") {
  const std::vector<double> u{1.0, 2.0}, minus{-1.0, -2.0}, e1{1.0, 0.0}, e2{0.0, 1.0};
  REQUIRE(cosine_distance(u, u) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(cosine_distance(u, minus) == Catch::Approx(2.0));
  REQUIRE(cosine_distance(e1, e2) == Catch::Approx(1.0));
  REQUIRE_THROWS_AS(cosine_distance(std::vector<double>{0.0, 0.0}, u), ConfigError);
  REQUIRE_THROWS_AS(cosine_distance(std::vector<double>{1.0}, u), DimensionError);
}

TEST_CASE("distance matrices over corpus measures", "[measures]") {
  const std::vector<Dataset> datasets{dataset("c", "NER", {"a/O b/O c/O d/O"}), dataset("a", "NER", {"a/O b/O e/O"}),
                                      dataset("b", "NER", {"a/O z/O", "b/O"})};
  const MeasureContext context;
  const auto overlap = distance_matrix(datasets, Measure::VocabOverlap, context);
  REQUIRE(overlap.size() == 6);
  REQUIRE(overlap.front().source_id == "a");
  REQUIRE(overlap.front().target_id == "b");
  REQUIRE(overlap.back().source_id == "c");
  REQUIRE(overlap.back().target_id == "b");
  for (std::size_t i = 1; i < overlap.size(); ++i) {
    REQUIRE(std::tie(overlap[i - 1].source_id, overlap[i - 1].target_id) <
            std::tie(overlap[i].source_id, overlap[i].target_id));
  }
  auto value = [](const std::vector<DistanceRecord>& rs, const std::string& s, const std::string& t) {
    for (const auto& r : rs) {
      if (r.source_id == s && r.target_id == t) return r.value;
    }
    return -1.0;
  };
  REQUIRE(value(overlap, "a", "c") != value(overlap, "c", "a"));

  const auto divergence = distance_matrix(datasets, Measure::TermDistJSD, context);
  for (const auto& r : divergence) REQUIRE(r.value == value(divergence, r.target_id, r.source_id));
  REQUIRE(divergence.front().polarity == Polarity::LowerIsCloser);

  const auto sizes = distance_matrix(datasets, Measure::DatasetSize, context);
  REQUIRE(value(sizes, "b", "a") == 2.0);
  REQUIRE(sizes.front().polarity == Polarity::HigherIsCloser);

  REQUIRE(distance_matrix(datasets, Measure::LMPerplexity, context).size() == 6);
  REQUIRE_THROWS_AS(distance_matrix(std::vector<Dataset>{datasets[0]}, Measure::VocabOverlap, context), ConfigError);
}

TEST_CASE("model-based measures need trained models", "[measures]") {
  const std::vector<Dataset> datasets{dataset("a", "NER", {"a/O"}), dataset("b", "NER", {"b/O"})};
  for (Measure m : {Measure::TextEmb, Measure::TaskEmb, Measure::ModelSim}) {
    REQUIRE(is_model_based(m));
    REQUIRE_THROWS_AS(distance_matrix(datasets, m, MeasureContext{}), DependencyError);
  }
  ModelContext partial;
  partial.models.emplace("a", TaggerModel::initialize("a", {"O"}, 1, TaggerDims{64, 4}));
  MeasureContext context;
  context.models = &partial;
  try {
    distance_matrix(datasets, Measure::ModelSim, context);
    FAIL("expected a dependency error");
  } catch (const DependencyError& e) {
    REQUIRE(std::string(e.what()).find("'b'") != std::string::npos);
  }
}

TEST_CASE("polarities and names", "[measures]") {
  for (Measure m : kAllMeasures) REQUIRE(parse_measure(measure_name(m)) == m);
  REQUIRE(polarity_of(Measure::VocabOverlap) == Polarity::HigherIsCloser);
  REQUIRE(polarity_of(Measure::AnnotOverlap) == Polarity::HigherIsCloser);
  REQUIRE(polarity_of(Measure::DatasetSize) == Polarity::HigherIsCloser);
  REQUIRE(polarity_of(Measure::TaskEmb) == Polarity::HigherIsCloser);
  for (Measure m : {Measure::TermDistJSD, Measure::LMPerplexity, Measure::TextEmb, Measure::ModelSim}) {
    REQUIRE(polarity_of(m) == Polarity::LowerIsCloser);
  }
  REQUIRE_THROWS_AS(parse_measure("Bogus"), ConfigError);
}

TEST_CASE("distance files round trip at six decimals", "[measures]") {
  const std::vector<DistanceRecord> records{{Measure::TermDistJSD, "a", "b", 0.1234564, Polarity::LowerIsCloser},
                                            {Measure::TermDistJSD, "b", "a", 1.0, Polarity::LowerIsCloser}};
  std::stringstream io;
  write_distance_csv(io, records);
  REQUIRE(io.str() == "measure,source,target,value,polarity\nTermDistJSD,a,b,0.123456,LowerIsCloser\n"
                      "TermDistJSD,b,a,1.000000,LowerIsCloser\n");
  const auto back = read_distance_csv(io);
  REQUIRE(back.size() == 2);
  REQUIRE(back[0].value == 0.123456);
  REQUIRE(back[1].source_id == "b");
}

TEST_CASE("ranking by polarity", "[measures]") {
  const std::vector<DistanceRecord> higher{{Measure::VocabOverlap, "x", "t", 10.0, Polarity::HigherIsCloser},
                                           {Measure::VocabOverlap, "y", "t", 30.0, Polarity::HigherIsCloser},
                                           {Measure::VocabOverlap, "a", "t", 30.0, Polarity::HigherIsCloser},
                                           {Measure::VocabOverlap, "z", "u", 99.0, Polarity::HigherIsCloser}};
  REQUIRE(rank_sources(higher, "t").sources == std::vector<std::string>{"a", "y", "x"});
  const std::vector<DistanceRecord> lower{{Measure::ModelSim, "x", "t", 0.5, Polarity::LowerIsCloser},
                                          {Measure::ModelSim, "y", "t", 0.1, Polarity::LowerIsCloser}};
  const auto r = rank_sources(lower, "t");
  REQUIRE(r.sources == std::vector<std::string>{"y", "x"});
  REQUIRE(r.measure == "ModelSim");
}
