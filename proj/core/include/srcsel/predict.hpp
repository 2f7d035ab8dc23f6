#pragma once

// Meta-prediction of transfer gain from similarity values, and selection of
// the source set expected to help a target.

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "srcsel/common.hpp"
#include "srcsel/measures.hpp"
#include "srcsel/transfer.hpp"

namespace srcsel {

/// Declaration order is the class order used by every multi-class model.
enum class GainClass { Negative, Neutral, Positive };

std::string_view gain_class_name(GainClass cls);
GainClass parse_gain_class(std::string_view name);

/// Positive iff g >= theta, Negative iff g <= -theta, otherwise Neutral.
GainClass classify_gain(double gain, double theta = 0.5);

struct MetaSample {
  std::vector<double> x;  // one value per measure
  double y_gain = 0.0;
  GainClass y_class = GainClass::Neutral;
  std::string source_id;
  std::string target_id;
  Setting setting = Setting::DomainAdapt;
};

MetaSample make_sample(std::vector<double> x, double gain, double theta, std::string source_id, std::string target_id,
                       Setting setting);

/// One sample per (source, target) with a single-source observation under
/// `setting`. The gain is the mean over seeds; x holds the distance of that
/// pair under each measure in `per_measure` order.
std::vector<MetaSample> build_samples(std::span<const TransferObservation> observations, Setting setting,
                                      std::span<const std::vector<DistanceRecord>> per_measure, double theta);

enum class PredictorKind { SVMC, SVMR, KNN, LogReg, LinReg, TopN };

std::string_view predictor_kind_name(PredictorKind kind);
PredictorKind parse_predictor_kind(std::string_view name);
bool is_classifier(PredictorKind kind);
bool is_regressor(PredictorKind kind);

struct Hyper {
  double theta = 0.5;
  double C = 1.0;
  double epsilon = 0.1;
  std::optional<double> gamma;  // default 1 / (m * var(X)) on standardized X
  double tolerance = 1e-3;
  std::size_t k = 5;
  std::size_t top_n = 1;

  void validate() const;
};

using Prediction = std::variant<GainClass, double>;

std::string format_prediction(const Prediction& prediction);

class GainPredictor {
 public:
  PredictorKind kind() const { return kind_; }
  double theta() const { return theta_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t top_n() const { return top_n_; }
  /// True when the training data held a single class and the model predicts it everywhere.
  bool is_constant() const { return constant_.has_value(); }

  /// Class for classifiers, estimated gain in F1 points for regressors.
  Prediction predict(std::span<const double> x) const;
  /// The selection rule: predicted Positive, or predicted gain >= theta.
  bool recommends(std::span<const double> x) const;

  /// Linear-regression slope per raw feature followed by the intercept.
  std::vector<double> raw_coefficients() const;

  void save(std::ostream& out) const;
  static GainPredictor load(std::istream& in);

  friend GainPredictor fit(PredictorKind kind, std::span<const MetaSample> samples, const Hyper& hyper);

 private:
  struct Machine {
    int positive = -1;  // class index voted for by a positive decision
    int negative = -1;
    std::vector<std::vector<double>> vectors;
    std::vector<double> coef;
    double rho = 0.0;
  };

  std::vector<double> standardize(std::span<const double> x) const;
  GainClass predict_class(const std::vector<double>& z) const;
  double predict_value(const std::vector<double>& z) const;

  PredictorKind kind_ = PredictorKind::TopN;
  double theta_ = 0.5;
  std::size_t dimension_ = 0;
  std::size_t top_n_ = 1;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::optional<Prediction> constant_;
  double gamma_ = 1.0;
  std::vector<GainClass> classes_;
  std::vector<Machine> machines_;
  std::size_t k_ = 5;
  std::vector<std::vector<double>> points_;
  std::vector<GainClass> labels_;
  std::vector<double> weights_;  // LogReg: classes x dimension row-major; LinReg: dimension
  std::vector<double> bias_;     // LogReg: per class; LinReg: one intercept
};

/// Standardizes features with training statistics stored in the predictor.
/// A TopN predictor only records n.
GainPredictor fit(PredictorKind kind, std::span<const MetaSample> samples, const Hyper& hyper);

/// Samples whose target differs from `held_out_target`.
std::vector<MetaSample> without_target(std::span<const MetaSample> samples, const std::string& held_out_target);

/// The n closest sources under the record polarity, ties by source id; all if n exceeds them.
std::vector<std::string> topn_select(std::span<const DistanceRecord> records, std::size_t n);

struct ScoredSource {
  std::string source_id;
  std::vector<double> x;
  std::optional<Prediction> predicted;  // empty for rank-based selection
  bool selected = false;
};

/// Candidate sources of `target_id` with one value per measure in
/// `per_measure` order. Every measure must cover every candidate.
std::vector<ScoredSource> candidates_for(const std::string& target_id,
                                         std::span<const std::vector<DistanceRecord>> per_measure);

/// Scores and marks the candidates; a TopN predictor ranks by the first measure.
std::vector<ScoredSource> score_candidates(const GainPredictor& predictor, const std::string& target_id,
                                           std::span<const std::vector<DistanceRecord>> per_measure);

/// Selected source ids in id order; may be empty, meaning no transfer.
std::vector<std::string> select_set(const GainPredictor& predictor, const std::string& target_id,
                                    std::span<const std::vector<DistanceRecord>> per_measure);
std::vector<std::string> select_set(const GainPredictor& predictor, std::span<const DistanceRecord> records);

struct Selection {
  Setting setting = Setting::DomainAdapt;
  std::string target_id;
  std::string method;
  std::vector<std::string> sources;  // sorted
  std::string predicted;             // per-source predictions, informational
};

/// Tab-separated `setting target method sources predicted`; an empty set is written as "-".
void write_selections(std::ostream& out, std::span<const Selection> selections);
std::vector<Selection> read_selections(std::istream& in);

/// Raised when a selected source set has no observation to score it.
class NeedsObservationError : public Error {
 public:
  NeedsObservationError(std::string target_id, std::vector<std::string> sources);
  const std::string& target_id() const { return target_id_; }
  const std::vector<std::string>& sources() const { return sources_; }

 private:
  std::string target_id_;
  std::vector<std::string> sources_;
};

struct MethodScore {
  std::string method;
  double mean_gain = 0.0;
  double mean_set_size = 0.0;
  std::size_t targets = 0;
};

/// Realized gain of a selection: seed-mean gain of the matching observation,
/// or 0 for the empty set.
double realized_gain(const Selection& selection, std::span<const TransferObservation> observations);

/// Mean realized gain over targets per method, in order of first appearance.
std::vector<MethodScore> evaluate_selection(std::span<const Selection> selections,
                                            std::span<const TransferObservation> observations);

/// Selected non-empty source sets that have no observation yet, without duplicates.
std::vector<Selection> missing_observations(std::span<const Selection> selections,
                                            std::span<const TransferObservation> observations);

/// One predictor per target, each fit on the samples of all other targets.
/// Fits run concurrently; the result does not depend on scheduling.
std::map<std::string, GainPredictor> fit_leave_one_target_out(PredictorKind kind, std::span<const MetaSample> samples,
                                                              const Hyper& hyper);

}  // namespace srcsel
