#pragma once

// Model-based similarity: last-layer feature extraction, Procrustes alignment
// of two models' feature spaces, and text/task embeddings.

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <string>

#include "srcsel/corpus.hpp"
#include "srcsel/evalrank.hpp"
#include "srcsel/tagger.hpp"

namespace srcsel {

/// Hidden activations of one model over one dataset's train tokens,
/// sentence by sentence in file order (one row per token).
struct FeatureMatrix {
  std::string model_id;
  std::string dataset_id;
  Eigen::MatrixXd values;

  /// Fewer rows than columns: the alignment is underdetermined.
  bool underdetermined() const noexcept { return values.rows() < values.cols(); }
};

FeatureMatrix extract_features(const TaggerModel& model, const Dataset& target);

/// Header `model_id dataset_id n d`, then n rows of d values at 12 significant digits.
void write_feature_matrix(std::ostream& out, const FeatureMatrix& features);
FeatureMatrix read_feature_matrix(std::istream& in);

struct AlignOptions {
  /// Subtract column means before aligning (ablation only).
  bool center = false;
  /// false: unconstrained least-squares map instead of the orthogonal solution.
  bool orthogonal = true;
};

/// W maps source features onto target features: row-wise, W f_s ≈ f_t.
struct AlignmentMap {
  Eigen::MatrixXd W;
  double residual = 0.0;  // ||F_s W^T - F_t||_F
  std::string source_model;
  std::string target_model;
};

/// Orthogonal Procrustes: with F_t^T F_s = U S V^T, W = U V^T minimizes
/// ||F_s W^T - F_t||_F over orthogonal W. Both matrices must come from the same
/// dataset (equal row count and order) and have equal width.
AlignmentMap procrustes_align(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                              const AlignOptions& options = {});
AlignmentMap procrustes_align(const FeatureMatrix& source, const FeatureMatrix& target,
                              const AlignOptions& options = {});

/// ||W - I||_F.
double model_distance(const AlignmentMap& map);

/// Column mean of the model's features over the dataset.
Eigen::VectorXd text_embedding(const TaggerModel& model, const Dataset& dataset);

/// Empirical diagonal Fisher information per parameter block. Blocks:
/// "hidden" (one entry per hidden weight) and "output" (head weights summed
/// over labels, one entry per hidden unit, so models with different label
/// sets stay comparable).
struct TaskEmbedding {
  std::map<std::string, Eigen::VectorXd> blocks;
};

TaskEmbedding task_embedding(const TaggerModel& model, const Dataset& dataset);

/// Ranks sources for one target: per block, by cosine distance between the
/// source and target block vectors (closest first, ties by id); the block
/// rankings are fused with reciprocal rank fusion. Returns the fused scores
/// (higher is closer) keyed by source id.
std::map<std::string, double> task_embedding_scores(const TaskEmbedding& target,
                                                    const std::map<std::string, TaskEmbedding>& sources,
                                                    double k = kRrfConstant);

}  // namespace srcsel
