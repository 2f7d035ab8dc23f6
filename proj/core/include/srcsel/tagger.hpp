#pragma once

// Surrogate sequence tagger: hashed sparse features -> one ReLU hidden layer
// (the "last layer" the model-similarity measures read) -> softmax head.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srcsel/corpus.hpp"
#include "srcsel/evalrank.hpp"

namespace srcsel {

using FeatureIndices = std::vector<std::uint32_t>;

/// Hashed indicator features for the token at `position`: bias, surface form,
/// lowercase form, 3-character prefix and suffix, word shape, and the lowercase
/// forms of the neighbors at offsets -2..+2 ("<pad>" beyond the sentence).
FeatureIndices featurize(const Sentence& sentence, std::size_t position, std::size_t hash_dim);

struct TaggerDims {
  std::size_t hash_dim = 2048;
  std::size_t hidden_dim = 32;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int max_epochs = 100;
  /// Stop after this many consecutive epochs without a dev-score improvement.
  int patience = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 0 = evaluation of the starting weights
  double train_loss = 0.0;
  double dev_score = 0.0;
};

/// Gradient of the token cross-entropy, factored: the hidden-weight rows of the
/// active features each receive `hidden_delta`; the head receives
/// hidden ⊗ logit_delta and the bias logit_delta.
struct TokenGradient {
  Eigen::VectorXd hidden;
  Eigen::VectorXd hidden_delta;
  Eigen::VectorXd logit_delta;
  double loss = 0.0;
};

class TaggerModel {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  /// Seeded random weights. Labels are kept in the given order.
  static TaggerModel initialize(std::string id, std::vector<std::string> labels, std::uint64_t seed,
                                TaggerDims dims = {});

  const std::string& id() const noexcept { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const TaggerDims& dims() const noexcept { return dims_; }
  const RowMatrix& hidden_weights() const noexcept { return hidden_weights_; }
  const Eigen::MatrixXd& head_weights() const noexcept { return head_weights_; }
  const Eigen::VectorXd& head_bias() const noexcept { return head_bias_; }
  const std::vector<EpochRecord>& training_log() const noexcept { return log_; }

  /// True when the labels use BIO spans (scored by span F1), false for plain tags (accuracy).
  bool span_labels() const;
  std::optional<std::size_t> label_index(std::string_view label) const;

  Eigen::VectorXd hidden(const FeatureIndices& features) const;
  Eigen::VectorXd probabilities(const FeatureIndices& features) const;
  TokenGradient token_gradient(const FeatureIndices& features, std::size_t gold) const;

  std::vector<std::string> predict(const Sentence& sentence) const;

  /// Summed token cross-entropy of one sentence. Throws ConfigError on unknown gold labels.
  double loss(const Sentence& sentence) const;

  // Flat parameter view: hidden weights (row-major), head weights (column-major), head bias.
  std::size_t parameter_count() const noexcept;
  double parameter(std::size_t index) const;
  void set_parameter(std::size_t index, double value);
  /// Dense gradient of loss(sentence) in the flat parameter order.
  Eigen::VectorXd gradient(const Sentence& sentence) const;

  void save(std::ostream& out) const;
  static TaggerModel load(std::istream& in);

 private:
  friend TaggerModel train_loop(TaggerModel, std::span<const Sentence>, std::span<const Sentence>,
                                const TrainConfig&);
  friend TaggerModel swap_head(const TaggerModel&, std::vector<std::string>, std::uint64_t);

  void sgd_step(const FeatureIndices& features, std::size_t gold, double rate, double& loss_out);
  /// Rounds every weight to 12 significant digits so saved files reload bit-exactly.
  void canonicalize();

  std::string id_;
  std::vector<std::string> labels_;
  std::uint64_t seed_ = 0;
  TaggerDims dims_;
  RowMatrix hidden_weights_;       // hash_dim x hidden_dim
  Eigen::MatrixXd head_weights_;   // hidden_dim x labels
  Eigen::VectorXd head_bias_;      // labels
  std::vector<EpochRecord> log_;
};

/// Head labels for a dataset: "O" followed by the sorted label set.
std::vector<std::string> tagger_labels(const Dataset& dataset);

/// Span micro-F1 for BIO label sets, token accuracy (reported as P = R = F1) otherwise.
PrfScore evaluate(const TaggerModel& model, std::span<const Sentence> sentences);

/// Seeded SGD on train, best-dev snapshot with patience-based early stopping.
TaggerModel train(const Dataset& dataset, const TrainConfig& config, TaggerDims dims = {});

/// Evaluates an unmodified model on the target's test split. The label sets must match.
PrfScore zero_shot_apply(const TaggerModel& model, const Dataset& target);

/// Continues training on the target's train split with its dev split for early stopping.
TaggerModel fine_tune(const TaggerModel& model, const Dataset& target, const TrainConfig& config);

/// Keeps the hidden layer, replaces the head by a seeded random one for `labels`.
TaggerModel swap_head(const TaggerModel& model, std::vector<std::string> labels, std::uint64_t seed);

/// Trains on the round-robin interleaving of the sources' train and dev splits.
/// Returns no model for an empty source list (no transfer). Sources must share
/// one label set unless `union_labels` is set, in which case the head covers
/// the union of their labels (used before a head swap).
std::optional<TaggerModel> train_multi(std::span<const Dataset* const> sources, const TrainConfig& config,
                                       TaggerDims dims = {}, bool union_labels = false);

/// Throws ConfigError naming the labels present on one side only.
void require_same_labels(const TaggerModel& model, const Dataset& target);

}  // namespace srcsel
