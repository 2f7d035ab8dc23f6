#include "srcsel/predict.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "srcsel/svm.hpp"

namespace srcsel {
namespace {

using Json = nlohmann::json;

constexpr std::size_t kLogRegMaxIterations = 200000;
constexpr double kLogRegGradientTolerance = 1e-8;

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  Eigen::MatrixXd m(static_cast<long>(rows.size()), static_cast<long>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<long>(r), static_cast<long>(c)) = rows[r][c];
  }
  return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

std::string pair_key(const std::string& source, const std::string& target) { return source + "\n" + target; }

}  // namespace

std::string_view gain_class_name(GainClass cls) {
  switch (cls) {
    case GainClass::Negative: return "Negative";
    case GainClass::Neutral: return "Neutral";
    case GainClass::Positive: return "Positive";
  }
  return "Neutral";
}

GainClass parse_gain_class(std::string_view name) {
  for (GainClass c : {GainClass::Negative, GainClass::Neutral, GainClass::Positive}) {
    if (gain_class_name(c) == name) return c;
  }
  throw ConfigError("unknown gain class '" + std::string(name) + "'");
}

GainClass classify_gain(double gain, double theta) {
  if (!(theta > 0.0)) throw ConfigError("theta must be positive, got " + format_fixed(theta, 6));
  if (std::isnan(gain)) throw ConfigError("classify_gain: gain is NaN");
  if (gain >= theta) return GainClass::Positive;
  if (gain <= -theta) return GainClass::Negative;
  return GainClass::Neutral;
}

MetaSample make_sample(std::vector<double> x, double gain, double theta, std::string source_id, std::string target_id,
                       Setting setting) {
  return MetaSample{std::move(x), gain, classify_gain(gain, theta), std::move(source_id), std::move(target_id), setting};
}

std::vector<MetaSample> build_samples(std::span<const TransferObservation> observations, Setting setting,
                                      std::span<const std::vector<DistanceRecord>> per_measure, double theta) {
  if (per_measure.empty()) throw ConfigError("build_samples: no measures given");
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> gains;  // (target, source)
  for (const auto& o : observations) {
    if (o.setting != setting || o.source_ids.size() != 1) continue;
    auto& [sum, count] = gains[{o.target_id, o.source_ids.front()}];
    sum += o.gain_abs;
    ++count;
  }
  std::vector<std::map<std::string, double>> lookup(per_measure.size());
  for (std::size_t m = 0; m < per_measure.size(); ++m) {
    for (const auto& r : per_measure[m]) lookup[m][pair_key(r.source_id, r.target_id)] = r.value;
  }
  std::vector<MetaSample> samples;
  for (const auto& [key, agg] : gains) {
    const auto& [target, source] = key;
    std::vector<double> x;
    for (std::size_t m = 0; m < per_measure.size(); ++m) {
      const auto it = lookup[m].find(pair_key(source, target));
      if (it == lookup[m].end()) {
        const std::string name = per_measure[m].empty() ? "measure " + std::to_string(m)
                                                        : std::string(measure_name(per_measure[m].front().measure));
        throw DependencyError("no " + name + " distance for " + source + " -> " + target);
      }
      x.push_back(it->second);
    }
    samples.push_back(make_sample(std::move(x), agg.first / static_cast<double>(agg.second), theta, source, target,
                                  setting));
  }
  return samples;
}

std::string_view predictor_kind_name(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::SVMC: return "SVMC";
    case PredictorKind::SVMR: return "SVMR";
    case PredictorKind::KNN: return "KNN";
    case PredictorKind::LogReg: return "LogReg";
    case PredictorKind::LinReg: return "LinReg";
    case PredictorKind::TopN: return "TopN";
  }
  return "TopN";
}

PredictorKind parse_predictor_kind(std::string_view name) {
  for (PredictorKind k : {PredictorKind::SVMC, PredictorKind::SVMR, PredictorKind::KNN, PredictorKind::LogReg,
                          PredictorKind::LinReg, PredictorKind::TopN}) {
    if (predictor_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown predictor kind '" + std::string(name) + "'");
}

bool is_classifier(PredictorKind kind) {
  return kind == PredictorKind::SVMC || kind == PredictorKind::KNN || kind == PredictorKind::LogReg;
}

bool is_regressor(PredictorKind kind) { return kind == PredictorKind::SVMR || kind == PredictorKind::LinReg; }

void Hyper::validate() const {
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (!(C > 0.0)) throw ConfigError("C must be positive");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (k == 0) throw ConfigError("k must be at least 1");
  if (top_n == 0) throw ConfigError("top_n must be at least 1");
}

std::string format_prediction(const Prediction& prediction) {
  if (const auto* cls = std::get_if<GainClass>(&prediction)) return std::string(gain_class_name(*cls));
  return format_fixed(std::get<double>(prediction), 4);
}

std::vector<double> GainPredictor::standardize(std::span<const double> x) const {
  if (x.size() != dimension_) {
    throw DimensionError("predictor expects " + std::to_string(dimension_) + " features, got " +
                         std::to_string(x.size()));
  }
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (std::isnan(x[j])) throw ConfigError("predictor input is NaN");
    z[j] = (x[j] - mean_[j]) / scale_[j];
  }
  return z;
}

GainClass GainPredictor::predict_class(const std::vector<double>& z) const {
  std::vector<double> votes(classes_.size(), 0.0);
  switch (kind_) {
    case PredictorKind::SVMC: {
      const Eigen::VectorXd v = to_vector(z);
      for (const auto& m : machines_) {
        svm::KernelMachine km{to_matrix(m.vectors, dimension_), m.coef, m.rho, gamma_};
        votes[static_cast<std::size_t>(km.decision(v) > 0.0 ? m.positive : m.negative)] += 1.0;
      }
      break;
    }
    case PredictorKind::KNN: {
      std::vector<std::pair<double, std::size_t>> dist;
      for (std::size_t i = 0; i < points_.size(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) d += (points_[i][j] - z[j]) * (points_[i][j] - z[j]);
        dist.emplace_back(d, i);
      }
      std::sort(dist.begin(), dist.end());
      const std::size_t k = std::min(k_, dist.size());
      for (std::size_t r = 0; r < k; ++r) {
        const GainClass label = labels_[dist[r].second];
        votes[static_cast<std::size_t>(std::find(classes_.begin(), classes_.end(), label) - classes_.begin())] += 1.0;
      }
      break;
    }
    case PredictorKind::LogReg: {
      for (std::size_t c = 0; c < classes_.size(); ++c) {
        double s = bias_[c];
        for (std::size_t j = 0; j < dimension_; ++j) s += weights_[c * dimension_ + j] * z[j];
        votes[c] = s;
      }
      break;
    }
    default:
      throw ConfigError(std::string(predictor_kind_name(kind_)) + " does not predict classes");
  }
  // First maximum wins, so ties go to the earlier class.
  const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
  return classes_[static_cast<std::size_t>(best)];
}

double GainPredictor::predict_value(const std::vector<double>& z) const {
  switch (kind_) {
    case PredictorKind::SVMR: {
      const auto& m = machines_.front();
      return svm::KernelMachine{to_matrix(m.vectors, dimension_), m.coef, m.rho, gamma_}.decision(to_vector(z));
    }
    case PredictorKind::LinReg: {
      double s = bias_.front();
      for (std::size_t j = 0; j < dimension_; ++j) s += weights_[j] * z[j];
      return s;
    }
    default:
      throw ConfigError(std::string(predictor_kind_name(kind_)) + " does not predict gains");
  }
}

Prediction GainPredictor::predict(std::span<const double> x) const {
  if (kind_ == PredictorKind::TopN) throw ConfigError("TopN selects by rank and does not score single pairs");
  const std::vector<double> z = standardize(x);
  if (constant_) return *constant_;
  if (is_classifier(kind_)) return predict_class(z);
  return predict_value(z);
}

bool GainPredictor::recommends(std::span<const double> x) const {
  const Prediction p = predict(x);
  if (const auto* cls = std::get_if<GainClass>(&p)) return *cls == GainClass::Positive;
  return std::get<double>(p) >= theta_;
}

std::vector<double> GainPredictor::raw_coefficients() const {
  if (kind_ != PredictorKind::LinReg) throw ConfigError("raw_coefficients: only defined for LinReg");
  std::vector<double> out(dimension_ + 1);
  double intercept = bias_.front();
  for (std::size_t j = 0; j < dimension_; ++j) {
    out[j] = weights_[j] / scale_[j];
    intercept -= out[j] * mean_[j];
  }
  out[dimension_] = intercept;
  return out;
}

void GainPredictor::save(std::ostream& out) const {
  Json j;
  j["format"] = "srcsel-predictor";
  j["version"] = 1;
  j["kind"] = predictor_kind_name(kind_);
  j["theta"] = theta_;
  j["dimension"] = dimension_;
  j["top_n"] = top_n_;
  j["mean"] = mean_;
  j["scale"] = scale_;
  if (!constant_) {
    j["constant"] = nullptr;
  } else if (const auto* cls = std::get_if<GainClass>(&*constant_)) {
    j["constant"] = {{"class", gain_class_name(*cls)}};
  } else {
    j["constant"] = {{"value", std::get<double>(*constant_)}};
  }
  j["gamma"] = gamma_;
  j["classes"] = Json::array();
  for (GainClass c : classes_) j["classes"].push_back(gain_class_name(c));
  j["machines"] = Json::array();
  for (const auto& m : machines_) {
    j["machines"].push_back(
        {{"positive", m.positive}, {"negative", m.negative}, {"vectors", m.vectors}, {"coef", m.coef}, {"rho", m.rho}});
  }
  j["k"] = k_;
  j["points"] = points_;
  j["labels"] = Json::array();
  for (GainClass c : labels_) j["labels"].push_back(gain_class_name(c));
  j["weights"] = weights_;
  j["bias"] = bias_;
  out << j.dump(1) << '\n';
}

GainPredictor GainPredictor::load(std::istream& in) {
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("predictor file: ") + e.what(), 0);
  }
  try {
    if (j.at("format") != "srcsel-predictor" || j.at("version") != 1) {
      throw ParseError("predictor file: unsupported format", 0);
    }
    GainPredictor p;
    p.kind_ = parse_predictor_kind(j.at("kind").get<std::string>());
    p.theta_ = j.at("theta").get<double>();
    p.dimension_ = j.at("dimension").get<std::size_t>();
    p.top_n_ = j.at("top_n").get<std::size_t>();
    p.mean_ = j.at("mean").get<std::vector<double>>();
    p.scale_ = j.at("scale").get<std::vector<double>>();
    const Json& constant = j.at("constant");
    if (!constant.is_null()) {
      if (constant.contains("class")) {
        p.constant_ = parse_gain_class(constant.at("class").get<std::string>());
      } else {
        p.constant_ = constant.at("value").get<double>();
      }
    }
    p.gamma_ = j.at("gamma").get<double>();
    for (const auto& c : j.at("classes")) p.classes_.push_back(parse_gain_class(c.get<std::string>()));
    for (const auto& m : j.at("machines")) {
      p.machines_.push_back(Machine{m.at("positive").get<int>(), m.at("negative").get<int>(),
                                    m.at("vectors").get<std::vector<std::vector<double>>>(),
                                    m.at("coef").get<std::vector<double>>(), m.at("rho").get<double>()});
    }
    p.k_ = j.at("k").get<std::size_t>();
    p.points_ = j.at("points").get<std::vector<std::vector<double>>>();
    for (const auto& c : j.at("labels")) p.labels_.push_back(parse_gain_class(c.get<std::string>()));
    p.weights_ = j.at("weights").get<std::vector<double>>();
    p.bias_ = j.at("bias").get<std::vector<double>>();
    if (p.mean_.size() != p.dimension_ || p.scale_.size() != p.dimension_) {
      throw ParseError("predictor file: standardization does not match dimension", 0);
    }
    return p;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("predictor file: ") + e.what(), 0);
  }
}

GainPredictor fit(PredictorKind kind, std::span<const MetaSample> samples, const Hyper& hyper) {
  hyper.validate();
  GainPredictor p;
  p.kind_ = kind;
  p.theta_ = hyper.theta;
  p.top_n_ = hyper.top_n;
  p.k_ = hyper.k;
  if (kind == PredictorKind::TopN) return p;

  if (samples.size() < 2) {
    throw ConfigError("fit " + std::string(predictor_kind_name(kind)) + ": need at least 2 samples, got " +
                      std::to_string(samples.size()));
  }
  const std::size_t m = samples.front().x.size();
  if (m == 0) throw DimensionError("fit: samples have no features");
  for (const auto& s : samples) {
    if (s.x.size() != m) throw DimensionError("fit: samples have inconsistent feature counts");
    for (double v : s.x) {
      if (std::isnan(v)) throw ConfigError("fit: NaN feature in sample " + s.source_id + " -> " + s.target_id);
    }
    if (std::isnan(s.y_gain)) throw ConfigError("fit: NaN gain in sample " + s.source_id + " -> " + s.target_id);
  }
  const std::size_t n = samples.size();
  p.dimension_ = m;

  // Population standardization; constant features keep unit scale.
  p.mean_.assign(m, 0.0);
  p.scale_.assign(m, 0.0);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < m; ++j) p.mean_[j] += s.x[j];
  }
  for (double& v : p.mean_) v /= static_cast<double>(n);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < m; ++j) p.scale_[j] += (s.x[j] - p.mean_[j]) * (s.x[j] - p.mean_[j]);
  }
  for (double& v : p.scale_) {
    v = std::sqrt(v / static_cast<double>(n));
    if (!(v > 0.0)) v = 1.0;
  }
  std::vector<std::vector<double>> Z;
  for (const auto& s : samples) Z.push_back(p.standardize(s.x));
  const Eigen::MatrixXd X = to_matrix(Z, m);

  if (hyper.gamma) {
    p.gamma_ = *hyper.gamma;
  } else {
    const double mean_all = X.mean();
    const double var = (X.array() - mean_all).square().mean();
    p.gamma_ = var > 0.0 ? 1.0 / (static_cast<double>(m) * var) : 1.0;
  }

  if (is_classifier(kind)) {
    for (GainClass c : {GainClass::Negative, GainClass::Neutral, GainClass::Positive}) {
      for (const auto& s : samples) {
        if (s.y_class == c) {
          p.classes_.push_back(c);
          break;
        }
      }
    }
    if (p.classes_.size() == 1) {
      p.constant_ = p.classes_.front();
      return p;
    }
  }

  switch (kind) {
    case PredictorKind::SVMC: {
      for (std::size_t a = 0; a < p.classes_.size(); ++a) {
        for (std::size_t b = a + 1; b < p.classes_.size(); ++b) {
          std::vector<std::vector<double>> rows;
          std::vector<int> labels;
          for (std::size_t i = 0; i < n; ++i) {
            if (samples[i].y_class == p.classes_[a] || samples[i].y_class == p.classes_[b]) {
              rows.push_back(Z[i]);
              labels.push_back(samples[i].y_class == p.classes_[a] ? +1 : -1);
            }
          }
          const auto km = svm::train_classifier(to_matrix(rows, m), labels, hyper.C, p.gamma_, hyper.tolerance);
          GainPredictor::Machine machine{static_cast<int>(a), static_cast<int>(b), {}, km.coef, km.rho};
          for (long r = 0; r < km.vectors.rows(); ++r) {
            machine.vectors.emplace_back(km.vectors.row(r).data(), km.vectors.row(r).data() + m);
          }
          p.machines_.push_back(std::move(machine));
        }
      }
      break;
    }
    case PredictorKind::SVMR: {
      std::vector<double> y;
      for (const auto& s : samples) y.push_back(s.y_gain);
      const auto km = svm::train_regressor(X, y, hyper.C, hyper.epsilon, p.gamma_, hyper.tolerance);
      GainPredictor::Machine machine{-1, -1, {}, km.coef, km.rho};
      for (long r = 0; r < km.vectors.rows(); ++r) {
        machine.vectors.emplace_back(km.vectors.row(r).data(), km.vectors.row(r).data() + m);
      }
      p.machines_.push_back(std::move(machine));
      break;
    }
    case PredictorKind::KNN:
      p.points_ = Z;
      for (const auto& s : samples) p.labels_.push_back(s.y_class);
      break;
    case PredictorKind::LogReg: {
      // Multinomial cross-entropy scaled by C plus 0.5 |W|^2 (bias unpenalized),
      // minimized by gradient descent with a step from a curvature bound.
      const std::size_t K = p.classes_.size();
      std::vector<std::size_t> target(n);
      for (std::size_t i = 0; i < n; ++i) {
        target[i] = static_cast<std::size_t>(std::find(p.classes_.begin(), p.classes_.end(), samples[i].y_class) -
                                             p.classes_.begin());
      }
      Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<long>(K), static_cast<long>(m));
      Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<long>(K));
      double bound = 1.0;
      for (std::size_t i = 0; i < n; ++i) bound += 0.5 * hyper.C * (X.row(static_cast<long>(i)).squaredNorm() + 1.0);
      const double step = 1.0 / bound;
      for (std::size_t iter = 0; iter < kLogRegMaxIterations; ++iter) {
        Eigen::MatrixXd gW = W;
        Eigen::VectorXd gb = Eigen::VectorXd::Zero(static_cast<long>(K));
        for (std::size_t i = 0; i < n; ++i) {
          const Eigen::VectorXd xi = X.row(static_cast<long>(i)).transpose();
          Eigen::VectorXd logits = W * xi + b;
          logits.array() -= logits.maxCoeff();
          Eigen::VectorXd prob = logits.array().exp();
          prob /= prob.sum();
          prob(static_cast<long>(target[i])) -= 1.0;
          gW += hyper.C * prob * xi.transpose();
          gb += hyper.C * prob;
        }
        const double norm = std::max(gW.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff());
        if (norm < kLogRegGradientTolerance) break;
        W -= step * gW;
        b -= step * gb;
      }
      p.weights_.assign(W.data(), W.data() + W.size());
      // Eigen is column-major; store row-major by class.
      for (std::size_t c = 0; c < K; ++c) {
        for (std::size_t j = 0; j < m; ++j) p.weights_[c * m + j] = W(static_cast<long>(c), static_cast<long>(j));
      }
      p.bias_.assign(b.data(), b.data() + b.size());
      break;
    }
    case PredictorKind::LinReg: {
      Eigen::MatrixXd A(static_cast<long>(n), static_cast<long>(m + 1));
      A.leftCols(static_cast<long>(m)) = X;
      A.col(static_cast<long>(m)).setOnes();
      Eigen::VectorXd y(static_cast<long>(n));
      for (std::size_t i = 0; i < n; ++i) y(static_cast<long>(i)) = samples[i].y_gain;
      const Eigen::VectorXd beta = A.completeOrthogonalDecomposition().solve(y);
      p.weights_.assign(beta.data(), beta.data() + m);
      p.bias_ = {beta(static_cast<long>(m))};
      break;
    }
    case PredictorKind::TopN:
      break;
  }
  return p;
}

std::vector<MetaSample> without_target(std::span<const MetaSample> samples, const std::string& held_out_target) {
  std::vector<MetaSample> out;
  for (const auto& s : samples) {
    if (s.target_id != held_out_target) out.push_back(s);
  }
  return out;
}

std::vector<std::string> topn_select(std::span<const DistanceRecord> records, std::size_t n) {
  if (records.empty()) throw ConfigError("topn_select: no distance records");
  if (n == 0) throw ConfigError("topn_select: n must be at least 1");
  const std::string& target = records.front().target_id;
  for (const auto& r : records) {
    if (r.target_id != target) throw ConfigError("topn_select: records span several targets");
  }
  const Ranking ranking = rank_sources(records, target);
  std::vector<std::string> out(ranking.sources.begin(),
                               ranking.sources.begin() + static_cast<long>(std::min(n, ranking.sources.size())));
  return out;
}

std::vector<ScoredSource> candidates_for(const std::string& target_id,
                                         std::span<const std::vector<DistanceRecord>> per_measure) {
  if (per_measure.empty()) throw ConfigError("candidates_for: no measures given");
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : per_measure.front()) {
    if (r.target_id == target_id) values[r.source_id].push_back(r.value);
  }
  for (std::size_t m = 1; m < per_measure.size(); ++m) {
    std::map<std::string, double> seen;
    for (const auto& r : per_measure[m]) {
      if (r.target_id == target_id) seen[r.source_id] = r.value;
    }
    for (auto& [source, x] : values) {
      const auto it = seen.find(source);
      if (it == seen.end()) {
        throw DependencyError("no " + std::string(measure_name(per_measure[m].empty() ? Measure::VocabOverlap
                                                                                      : per_measure[m].front().measure)) +
                              " distance for " + source + " -> " + target_id);
      }
      x.push_back(it->second);
    }
  }
  std::vector<ScoredSource> out;
  for (auto& [source, x] : values) out.push_back(ScoredSource{source, std::move(x), std::nullopt, false});
  return out;
}

std::vector<ScoredSource> score_candidates(const GainPredictor& predictor, const std::string& target_id,
                                           std::span<const std::vector<DistanceRecord>> per_measure) {
  std::vector<ScoredSource> candidates = candidates_for(target_id, per_measure);
  if (predictor.kind() == PredictorKind::TopN) {
    std::vector<DistanceRecord> records;
    for (const auto& r : per_measure.front()) {
      if (r.target_id == target_id) records.push_back(r);
    }
    if (records.empty()) return candidates;
    const auto chosen = topn_select(records, predictor.top_n());
    for (auto& c : candidates) c.selected = std::find(chosen.begin(), chosen.end(), c.source_id) != chosen.end();
    return candidates;
  }
  for (auto& c : candidates) {
    c.predicted = predictor.predict(c.x);
    if (const auto* cls = std::get_if<GainClass>(&*c.predicted)) {
      c.selected = *cls == GainClass::Positive;
    } else {
      c.selected = std::get<double>(*c.predicted) >= predictor.theta();
    }
  }
  return candidates;
}

std::vector<std::string> select_set(const GainPredictor& predictor, const std::string& target_id,
                                    std::span<const std::vector<DistanceRecord>> per_measure) {
  std::vector<std::string> out;
  for (const auto& c : score_candidates(predictor, target_id, per_measure)) {
    if (c.selected) out.push_back(c.source_id);
  }
  return out;
}

std::vector<std::string> select_set(const GainPredictor& predictor, std::span<const DistanceRecord> records) {
  if (records.empty()) return {};
  const std::vector<std::vector<DistanceRecord>> single{std::vector<DistanceRecord>(records.begin(), records.end())};
  return select_set(predictor, records.front().target_id, single);
}

void write_selections(std::ostream& out, std::span<const Selection> selections) {
  out << "setting\ttarget\tmethod\tsources\tpredicted\n";
  for (const auto& s : selections) {
    out << setting_name(s.setting) << '\t' << s.target_id << '\t' << s.method << '\t' << (s.sources.empty() ? "-" : join(s.sources, ",")) << '\t'
        << (s.predicted.empty() ? "-" : s.predicted) << '\n';
  }
}

std::vector<Selection> read_selections(std::istream& in) {
  std::vector<Selection> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view text = trim(line);
    if (text.empty() || text.front() == '#' || text.rfind("setting\t", 0) == 0) continue;
    const auto fields = split_fields(text, '\t');
    if (fields.size() < 4 || fields.size() > 5) throw ParseError("selection file: expected 4 or 5 fields", line_number);
    Selection s;
    try {
      s.setting = parse_setting(fields[0]);
    } catch (const Error& e) {
      throw ParseError(std::string("selection file: ") + e.what(), line_number);
    }
    s.target_id = fields[1];
    s.method = fields[2];
    if (fields[3] != "-") s.sources = split_fields(fields[3], ',');
    if (fields.size() == 5 && fields[4] != "-") s.predicted = fields[4];
    std::sort(s.sources.begin(), s.sources.end());
    out.push_back(std::move(s));
  }
  return out;
}

NeedsObservationError::NeedsObservationError(std::string target_id, std::vector<std::string> sources)
    : Error("needs observation: no run of source set {" + join(sources, ",") + "} on target '" + target_id + "'"),
      target_id_(std::move(target_id)),
      sources_(std::move(sources)) {}

double realized_gain(const Selection& selection, std::span<const TransferObservation> observations) {
  if (selection.sources.empty()) return 0.0;
  std::vector<std::string> wanted = selection.sources;
  std::sort(wanted.begin(), wanted.end());
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& o : observations) {
    if (o.setting == selection.setting && o.target_id == selection.target_id && o.source_ids == wanted) {
      sum += o.gain_abs;
      ++count;
    }
  }
  if (count == 0) throw NeedsObservationError(selection.target_id, wanted);
  return sum / static_cast<double>(count);
}

std::vector<MethodScore> evaluate_selection(std::span<const Selection> selections,
                                            std::span<const TransferObservation> observations) {
  std::vector<MethodScore> out;
  for (const auto& s : selections) {
    auto it = std::find_if(out.begin(), out.end(), [&](const MethodScore& m) { return m.method == s.method; });
    if (it == out.end()) {
      out.push_back(MethodScore{s.method, 0.0, 0.0, 0});
      it = std::prev(out.end());
    }
    it->mean_gain += realized_gain(s, observations);
    it->mean_set_size += static_cast<double>(s.sources.size());
    ++it->targets;
  }
  for (auto& m : out) {
    m.mean_gain /= static_cast<double>(m.targets);
    m.mean_set_size /= static_cast<double>(m.targets);
  }
  return out;
}

std::vector<Selection> missing_observations(std::span<const Selection> selections,
                                            std::span<const TransferObservation> observations) {
  std::set<std::string> have;
  for (const auto& o : observations) have.insert(observation_key(o.setting, o.source_ids, o.target_id, 0));
  std::set<std::string> listed;
  std::vector<Selection> out;
  for (const auto& s : selections) {
    if (s.sources.empty()) continue;
    const std::string key = observation_key(s.setting, s.sources, s.target_id, 0);
    if (have.count(key) || !listed.insert(key).second) continue;
    out.push_back(s);
  }
  return out;
}

std::map<std::string, GainPredictor> fit_leave_one_target_out(PredictorKind kind, std::span<const MetaSample> samples,
                                                              const Hyper& hyper) {
  std::set<std::string> targets;
  for (const auto& s : samples) targets.insert(s.target_id);
  std::vector<std::pair<std::string, std::future<GainPredictor>>> jobs;
  for (const auto& target : targets) {
    jobs.emplace_back(target, std::async(std::launch::async, [&, target] {
                        const auto training = without_target(samples, target);
                        return fit(kind, training, hyper);
                      }));
  }
  std::map<std::string, GainPredictor> out;
  for (auto& [target, job] : jobs) out.emplace(target, job.get());
  return out;
}

}  // namespace srcsel
