#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "meta_suite.hpp"
#include "srcsel/common.hpp"
#include "srcsel/predict.hpp"

using namespace srcsel;

namespace {

std::vector<MetaSample> one_dimensional(const std::vector<double>& xs, const std::vector<double>& gains,
                                        const std::string& target = "t") {
  std::vector<MetaSample> out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.push_back(make_sample({xs[i]}, gains[i], 0.5, "s" + std::to_string(i), target, Setting::DomainAdapt));
  }
  return out;
}

std::vector<DistanceRecord> records_for(const std::string& target, const std::vector<std::pair<std::string, double>>& values,
                                        Measure m = Measure::ModelSim) {
  std::vector<DistanceRecord> out;
  for (const auto& [source, v] : values) out.push_back({m, source, target, v, polarity_of(m)});
  return out;
}

std::string saved(const GainPredictor& p) {
  std::ostringstream out;
  p.save(out);
  return out.str();
}

// Separable 1-D training data: small distances help, large ones hurt.
std::vector<MetaSample> margin_data() {
  std::vector<double> xs, gains;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(-1.0 - 0.5 * i);
    gains.push_back(2.0);
  }
  for (int i = 0; i < 10; ++i) {
    xs.push_back(2.0 + 0.5 * i);
    gains.push_back(-2.0);
  }
  return one_dimensional(xs, gains);
}

}  // namespace

TEST_CASE("gain classes at the threshold boundaries", "[predict]") {
  const std::vector<double> g{-0.6, -0.5, -0.4, 0.0, 0.4, 0.5, 0.6};
  const std::vector<GainClass> expected{GainClass::Negative, GainClass::Negative, GainClass::Neutral,
                                        GainClass::Neutral,  GainClass::Neutral,  GainClass::Positive,
                                        GainClass::Positive};
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(classify_gain(g[i], 0.5) == expected[i]);
  REQUIRE_THROWS_AS(classify_gain(1.0, 0.0), ConfigError);
  REQUIRE_THROWS_AS(classify_gain(1.0, -1.0), ConfigError);
  REQUIRE_THROWS_AS(classify_gain(std::nan(""), 0.5), ConfigError);
  for (GainClass c : {GainClass::Negative, GainClass::Neutral, GainClass::Positive}) {
    REQUIRE(parse_gain_class(gain_class_name(c)) == c);
  }
}

TEST_CASE("gain classes partition the real line", "[predict][property]") {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const double theta = 0.05 + rng.uniform() * 2.0;
    const double g = rng.uniform(-5.0, 5.0);
    const GainClass c = classify_gain(g, theta);
    REQUIRE((c == GainClass::Positive) == (g >= theta));
    REQUIRE((c == GainClass::Negative) == (g <= -theta));
    REQUIRE((c == GainClass::Neutral) == (std::abs(g) < theta));
  }
}

TEST_CASE("top-n selection", "[predict]") {
  const auto records = records_for("t", {{"c", 0.3}, {"b", 0.1}, {"a", 0.3}, {"d", 0.9}});
  REQUIRE(topn_select(records, 1) == std::vector<std::string>{"b"});
  REQUIRE(topn_select(records, 2) == std::vector<std::string>{"b", "a"});
  REQUIRE(topn_select(records, 4).size() == 4);
  REQUIRE(topn_select(records, 10).size() == 4);
  REQUIRE_THROWS_AS(topn_select(std::vector<DistanceRecord>{}, 1), ConfigError);
  REQUIRE_THROWS_AS(topn_select(records, 0), ConfigError);
  auto mixed = records;
  mixed.push_back({Measure::ModelSim, "x", "u", 0.0, Polarity::LowerIsCloser});
  REQUIRE_THROWS_AS(topn_select(mixed, 1), ConfigError);
  const auto overlap = records_for("t", {{"x", 10.0}, {"y", 90.0}}, Measure::VocabOverlap);
  REQUIRE(topn_select(overlap, 1) == std::vector<std::string>{"y"});
}

TEST_CASE("top-n sets are nested", "[predict][property]") {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<std::string, double>> values;
    for (int i = 0; i < 7; ++i) values.emplace_back("s" + std::to_string(i), static_cast<double>(rng.below(4)));
    const auto records = records_for("t", values);
    for (std::size_t n = 1; n < 7; ++n) {
      const auto small = topn_select(records, n);
      const auto large = topn_select(records, n + 1);
      for (const auto& s : small) REQUIRE(std::find(large.begin(), large.end(), s) != large.end());
    }
  }
}

TEST_CASE("support vector classifier fits a separable set", "[predict]") {
  const auto samples = margin_data();
  const auto p = fit(PredictorKind::SVMC, samples, Hyper{});
  for (const auto& s : samples) REQUIRE(std::get<GainClass>(p.predict(s.x)) == s.y_class);
}

TEST_CASE("classifier decisions ignore affine rescaling", "[predict][property]") {
  Rng rng(14);
  std::vector<double> xs, gains;
  for (int i = 0; i < 30; ++i) {
    xs.push_back(rng.uniform(0.0, 3.0));
    gains.push_back(2.0 - 1.5 * xs.back() + 0.3 * rng.normal());
  }
  std::vector<double> scaled;
  for (double x : xs) scaled.push_back(3.0 * x + 7.0);
  for (PredictorKind kind : {PredictorKind::SVMC, PredictorKind::KNN, PredictorKind::LogReg}) {
    const auto a = fit(kind, one_dimensional(xs, gains), Hyper{});
    const auto b = fit(kind, one_dimensional(scaled, gains), Hyper{});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      REQUIRE(std::get<GainClass>(a.predict(std::vector<double>{xs[i]})) ==
              std::get<GainClass>(b.predict(std::vector<double>{scaled[i]})));
    }
  }
}

TEST_CASE("linear regression recovers a line in raw units", "[predict]") {
  std::vector<double> xs, ys;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(0.5 * i - 1.0);
    ys.push_back(2.0 * xs.back() + 1.0);
  }
  const auto p = fit(PredictorKind::LinReg, one_dimensional(xs, ys), Hyper{});
  const auto coef = p.raw_coefficients();
  REQUIRE(coef.size() == 2);
  REQUIRE(std::abs(coef[0] - 2.0) < 1e-6);
  REQUIRE(std::abs(coef[1] - 1.0) < 1e-6);
  REQUIRE(std::get<double>(p.predict(std::vector<double>{10.0})) == Catch::Approx(21.0));
  REQUIRE_THROWS_AS(fit(PredictorKind::SVMC, margin_data(), Hyper{}).raw_coefficients(), ConfigError);
}

TEST_CASE("one nearest neighbour reproduces training labels", "[predict]") {
  Rng rng(15);
  std::vector<double> xs, gains;
  for (int i = 0; i < 25; ++i) {
    xs.push_back(static_cast<double>(i) + 0.1 * rng.uniform());
    gains.push_back(rng.uniform(-2.0, 2.0));
  }
  Hyper h;
  h.k = 1;
  const auto samples = one_dimensional(xs, gains);
  const auto p = fit(PredictorKind::KNN, samples, h);
  for (const auto& s : samples) REQUIRE(std::get<GainClass>(p.predict(s.x)) == s.y_class);
}

TEST_CASE("support vector regression on a noiseless line", "[predict]") {
  std::vector<double> xs, ys;
  for (int i = 0; i <= 20; ++i) {
    xs.push_back(i / 20.0);
    ys.push_back(-xs.back());
  }
  const auto p = fit(PredictorKind::SVMR, one_dimensional(xs, ys), Hyper{});
  REQUIRE(std::abs(std::get<double>(p.predict(std::vector<double>{0.5})) + 0.5) <= 0.15);
}

TEST_CASE("logistic regression separates a margin", "[predict]") {
  const auto samples = margin_data();
  const auto p = fit(PredictorKind::LogReg, samples, Hyper{});
  for (const auto& s : samples) REQUIRE(std::get<GainClass>(p.predict(s.x)) == s.y_class);
}

TEST_CASE("single-class data gives a constant predictor", "[predict]") {
  const auto samples = one_dimensional({0.1, 0.5, 0.9}, {-1.0, -2.0, -3.0});
  for (PredictorKind kind : {PredictorKind::SVMC, PredictorKind::KNN, PredictorKind::LogReg}) {
    const auto p = fit(kind, samples, Hyper{});
    REQUIRE(p.is_constant());
    REQUIRE(std::get<GainClass>(p.predict(std::vector<double>{100.0})) == GainClass::Negative);
    REQUIRE_FALSE(p.recommends(std::vector<double>{0.0}));
  }
  const auto flat = fit(PredictorKind::SVMR, one_dimensional({0.1, 0.5}, {-1.0, -1.0}), Hyper{});
  REQUIRE(std::get<double>(flat.predict(std::vector<double>{0.3})) == Catch::Approx(-1.0).margin(0.1));
}

TEST_CASE("fit and predict validate their inputs", "[predict]") {
  REQUIRE_THROWS_AS(fit(PredictorKind::SVMC, one_dimensional({0.1}, {1.0}), Hyper{}), ConfigError);
  auto nan_sample = one_dimensional({0.1, 0.2}, {1.0, -1.0});
  nan_sample[0].x[0] = std::nan("");
  REQUIRE_THROWS_AS(fit(PredictorKind::SVMC, nan_sample, Hyper{}), ConfigError);
  const auto p = fit(PredictorKind::SVMC, margin_data(), Hyper{});
  REQUIRE_THROWS_AS(p.predict(std::vector<double>{1.0, 2.0}), DimensionError);
  Hyper bad;
  bad.C = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("saved predictors reload with identical predictions", "[predict]") {
  Rng rng(16);
  std::vector<MetaSample> samples;
  for (int i = 0; i < 40; ++i) {
    const double a = rng.uniform(0.0, 3.0), b = rng.uniform(-1.0, 1.0);
    samples.push_back(make_sample({a, b}, 2.0 - 1.5 * a + b + 0.2 * rng.normal(), 0.5, "s" + std::to_string(i), "t",
                                  Setting::DomainAdapt));
  }
  for (PredictorKind kind : {PredictorKind::SVMC, PredictorKind::SVMR, PredictorKind::KNN, PredictorKind::LogReg,
                             PredictorKind::LinReg, PredictorKind::TopN}) {
    const auto p = fit(kind, samples, Hyper{});
    std::istringstream in(saved(p));
    const auto back = GainPredictor::load(in);
    REQUIRE(saved(back) == saved(p));
    REQUIRE(back.kind() == kind);
    if (kind == PredictorKind::TopN) continue;
    for (int i = 0; i < 50; ++i) {
      const std::vector<double> x{rng.uniform(-1.0, 4.0), rng.uniform(-2.0, 2.0)};
      REQUIRE(format_prediction(back.predict(x)) == format_prediction(p.predict(x)));
      const Prediction original = p.predict(x);
      if (const auto* v = std::get_if<double>(&original)) REQUIRE(std::get<double>(back.predict(x)) == *v);
    }
  }
  std::istringstream junk("{\"format\": \"other\"}");
  REQUIRE_THROWS_AS(GainPredictor::load(junk), ParseError);
}

TEST_CASE("classifier selection is the set of predicted positives", "[predict]") {
  const auto p = fit(PredictorKind::SVMC, margin_data(), Hyper{});
  const auto records = records_for("t", {{"near", -3.0}, {"mid", 0.5}, {"far", 4.0}, {"close", -1.5}});
  const std::vector<std::vector<DistanceRecord>> inputs{records};
  std::vector<std::string> expected;
  for (const auto& c : candidates_for("t", inputs)) {
    if (std::get<GainClass>(p.predict(c.x)) == GainClass::Positive) expected.push_back(c.source_id);
  }
  REQUIRE(select_set(p, "t", inputs) == expected);
  REQUIRE(select_set(p, records) == expected);
  REQUIRE(std::find(expected.begin(), expected.end(), "near") != expected.end());
  REQUIRE(std::find(expected.begin(), expected.end(), "far") == expected.end());
}

TEST_CASE("all-negative predictions select nothing", "[predict]") {
  const auto p = fit(PredictorKind::SVMC, one_dimensional({0.1, 0.2, 0.3}, {-1.0, -2.0, -3.0}), Hyper{});
  const auto records = records_for("t", {{"a", 0.1}, {"b", 0.2}});
  REQUIRE(select_set(p, records).empty());
}

TEST_CASE("regressors select gains at or above theta", "[predict]") {
  std::vector<double> xs, ys;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(i);
    ys.push_back(3.0 - 0.5 * i);
  }
  const auto p = fit(PredictorKind::LinReg, one_dimensional(xs, ys), Hyper{});
  const auto records = records_for("t", {{"a", 4.0}, {"b", 5.0}, {"c", 6.0}});
  REQUIRE(select_set(p, records) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("a top-n predictor ranks by the first measure", "[predict]") {
  Hyper h;
  h.top_n = 2;
  const auto p = fit(PredictorKind::TopN, margin_data(), h);
  const auto records = records_for("t", {{"a", 0.9}, {"b", 0.1}, {"c", 0.2}});
  REQUIRE(select_set(p, records) == std::vector<std::string>{"b", "c"});
}

TEST_CASE("meta-samples average gains over seeds", "[predict]") {
  std::vector<TransferObservation> log{make_observation(Setting::DomainAdapt, {"s"}, "t", 1, 50, 51),
                                       make_observation(Setting::DomainAdapt, {"s"}, "t", 2, 50, 50),
                                       make_observation(Setting::ZeroShot, {"s"}, "t", 1, 50, 10),
                                       make_observation(Setting::DomainAdapt, {"s", "u"}, "t", 1, 50, 90)};
  const std::vector<std::vector<DistanceRecord>> inputs{records_for("t", {{"s", 0.25}})};
  const auto samples = build_samples(log, Setting::DomainAdapt, inputs, 0.5);
  REQUIRE(samples.size() == 1);
  REQUIRE(samples[0].y_gain == Catch::Approx(0.5));
  REQUIRE(samples[0].y_class == GainClass::Positive);
  REQUIRE(samples[0].x == std::vector<double>{0.25});
  const std::vector<std::vector<DistanceRecord>> missing{records_for("t", {{"other", 0.25}})};
  REQUIRE_THROWS_AS(build_samples(log, Setting::DomainAdapt, missing, 0.5), DependencyError);
}

TEST_CASE("selection files round trip", "[predict]") {
  const std::vector<Selection> rows{{Setting::DomainAdapt, "t", "SVMC", {"a", "b"}, "a=Positive,b=Positive"},
                                    {Setting::DomainAdapt, "t", "SVMR", {}, ""}};
  std::stringstream io;
  write_selections(io, rows);
  REQUIRE(io.str() == "setting\ttarget\tmethod\tsources\tpredicted\n"
                      "DomainAdapt\tt\tSVMC\ta,b\ta=Positive,b=Positive\nDomainAdapt\tt\tSVMR\t-\t-\n");
  const auto back = read_selections(io);
  REQUIRE(back.size() == 2);
  REQUIRE(back[0].sources == rows[0].sources);
  REQUIRE(back[1].sources.empty());
  REQUIRE(back[1].predicted.empty());
}

TEST_CASE("evaluating selections", "[predict]") {
  std::vector<TransferObservation> log{make_observation(Setting::DomainAdapt, {"a"}, "t", 1, 50, 52),
                                       make_observation(Setting::DomainAdapt, {"a"}, "t", 2, 50, 54),
                                       make_observation(Setting::DomainAdapt, {"a", "b"}, "t", 1, 50, 49),
                                       make_observation(Setting::DomainAdapt, {"a"}, "u", 1, 60, 61)};
  const std::vector<Selection> nothing{{Setting::DomainAdapt, "t", "SVMC", {}, ""},
                                       {Setting::DomainAdapt, "u", "SVMC", {}, ""}};
  const auto zero = evaluate_selection(nothing, log);
  REQUIRE(zero.size() == 1);
  REQUIRE(zero[0].mean_gain == 0.0);
  REQUIRE(zero[0].mean_set_size == 0.0);

  const std::vector<Selection> one{{Setting::DomainAdapt, "t", "Top-1", {"a"}, ""}};
  REQUIRE(evaluate_selection(one, log)[0].mean_gain == Catch::Approx(3.0));

  const std::vector<Selection> mixed{{Setting::DomainAdapt, "t", "All", {"b", "a"}, ""},
                                     {Setting::DomainAdapt, "u", "All", {"a"}, ""},
                                     {Setting::DomainAdapt, "t", "Top-1", {"a"}, ""}};
  const auto scores = evaluate_selection(mixed, log);
  REQUIRE(scores.size() == 2);
  REQUIRE(scores[0].method == "All");
  REQUIRE(scores[0].mean_gain == Catch::Approx(0.0));
  REQUIRE(scores[0].targets == 2);
  REQUIRE(scores[0].mean_set_size == Catch::Approx(1.5));

  const std::vector<Selection> unknown{{Setting::DomainAdapt, "t", "SVMR", {"b"}, ""},
                                       {Setting::DomainAdapt, "u", "SVMC", {"b"}, ""},
                                       {Setting::DomainAdapt, "u", "SVMR", {"b"}, ""}};
  try {
    evaluate_selection(unknown, log);
    FAIL("expected a missing observation");
  } catch (const NeedsObservationError& e) {
    REQUIRE(e.target_id() == "t");
    REQUIRE(e.sources() == std::vector<std::string>{"b"});
  }
  REQUIRE(missing_observations(unknown, log).size() == 2);
  REQUIRE(missing_observations(nothing, log).empty());
}

TEST_CASE("leave-one-target-out folds exclude their target", "[predict]") {
  const auto suite = srcsel::testing::make_meta_suite(srcsel::testing::MetaShape::MixedGains);
  std::vector<MetaSample> samples;
  for (const auto& [key, g] : suite.gain) {
    samples.push_back(make_sample({suite.distance.at(key)}, g, 0.5, key.first, key.second, Setting::DomainAdapt));
  }
  const auto folds = fit_leave_one_target_out(PredictorKind::SVMC, samples, Hyper{});
  REQUIRE(folds.size() == suite.ids.size());
  for (const auto& [target, predictor] : folds) {
    REQUIRE(saved(predictor) == saved(fit(PredictorKind::SVMC, without_target(samples, target), Hyper{})));
  }
  REQUIRE(without_target(samples, "meta0").size() == samples.size() - 8);
}

TEST_CASE("predicted sets lie strictly between top-1 and all", "[predict]") {
  const auto suite = srcsel::testing::make_meta_suite(srcsel::testing::MetaShape::MixedGains);
  std::vector<MetaSample> samples;
  std::vector<DistanceRecord> records;
  for (const auto& [key, g] : suite.gain) {
    samples.push_back(make_sample({suite.distance.at(key)}, g, 0.5, key.first, key.second, Setting::DomainAdapt));
    records.push_back({Measure::ModelSim, key.first, key.second, suite.distance.at(key), Polarity::LowerIsCloser});
  }
  const std::vector<std::vector<DistanceRecord>> inputs{records};
  const auto folds = fit_leave_one_target_out(PredictorKind::SVMC, samples, Hyper{});
  for (const auto& target : suite.ids) {
    const auto chosen = select_set(folds.at(target), target, inputs);
    REQUIRE(chosen.size() > 1);
    REQUIRE(chosen.size() < 8);
    const auto truth = suite.sources_at_least(target, 0.5);
    REQUIRE(std::set<std::string>(chosen.begin(), chosen.end()) == truth);
  }
}
