#include "srcsel/model_sim.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <vector>

#include "srcsel/common.hpp"
#include "srcsel/measures.hpp"

namespace srcsel {

FeatureMatrix extract_features(const TaggerModel& model, const Dataset& target) {
  const auto& sentences = target.splits.train;
  const std::size_t rows = token_count(sentences);
  if (rows == 0) throw ConfigError("feature extraction on '" + target.id + "': empty train split");
  FeatureMatrix out{model.id(), target.id, Eigen::MatrixXd(static_cast<long>(rows), static_cast<long>(model.dims().hidden_dim))};
  long row = 0;
  for (const auto& sentence : sentences) {
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      out.values.row(row++) = model.hidden(featurize(sentence, i, model.dims().hash_dim)).transpose();
    }
  }
  return out;
}

void write_feature_matrix(std::ostream& out, const FeatureMatrix& features) {
  out << features.model_id << ' ' << features.dataset_id << ' ' << features.values.rows() << ' '
      << features.values.cols() << '\n';
  for (long r = 0; r < features.values.rows(); ++r) {
    for (long c = 0; c < features.values.cols(); ++c) {
      out << (c > 0 ? " " : "") << format_sig12(features.values(r, c));
    }
    out << '\n';
  }
}

FeatureMatrix read_feature_matrix(std::istream& in) {
  FeatureMatrix features;
  long rows = 0, cols = 0;
  if (!(in >> features.model_id >> features.dataset_id >> rows >> cols) || rows < 0 || cols < 0) {
    throw ParseError("feature matrix: bad header", 1);
  }
  features.values.resize(rows, cols);
  std::string token;
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      if (!(in >> token)) throw ParseError("feature matrix: truncated", static_cast<std::size_t>(r + 2));
      features.values(r, c) = parse_double(token);
    }
  }
  return features;
}

AlignmentMap procrustes_align(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                              const AlignOptions& options) {
  if (source.rows() != target.rows() || source.cols() != target.cols()) {
    throw DimensionError("procrustes_align: source is " + std::to_string(source.rows()) + "x" +
                         std::to_string(source.cols()) + ", target is " + std::to_string(target.rows()) + "x" +
                         std::to_string(target.cols()));
  }
  if (source.rows() == 0 || source.cols() == 0) throw DimensionError("procrustes_align: empty feature matrix");

  Eigen::MatrixXd fs = source;
  Eigen::MatrixXd ft = target;
  if (options.center) {
    fs.rowwise() -= fs.colwise().mean();
    ft.rowwise() -= ft.colwise().mean();
  }

  AlignmentMap map;
  if (options.orthogonal) {
    const Eigen::MatrixXd cross = ft.transpose() * fs;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd u = svd.matrixU();
    Eigen::MatrixXd v = svd.matrixV();
    // Pin the sign of each singular pair: largest-magnitude entry of u_i positive.
    for (long i = 0; i < u.cols(); ++i) {
      Eigen::Index arg = 0;
      u.col(i).cwiseAbs().maxCoeff(&arg);
      if (u(arg, i) < 0.0) {
        u.col(i) *= -1.0;
        v.col(i) *= -1.0;
      }
    }
    map.W = u * v.transpose();
  } else {
    // least squares: fs * W^T ≈ ft
    map.W = fs.completeOrthogonalDecomposition().solve(ft).transpose();
  }
  map.residual = (fs * map.W.transpose() - ft).norm();
  return map;
}

AlignmentMap procrustes_align(const FeatureMatrix& source, const FeatureMatrix& target, const AlignOptions& options) {
  if (source.dataset_id != target.dataset_id) {
    throw DimensionError("procrustes_align: features come from different datasets ('" + source.dataset_id +
                         "' vs '" + target.dataset_id + "')");
  }
  AlignmentMap map = procrustes_align(source.values, target.values, options);
  map.source_model = source.model_id;
  map.target_model = target.model_id;
  return map;
}

double model_distance(const AlignmentMap& map) {
  return (map.W - Eigen::MatrixXd::Identity(map.W.rows(), map.W.cols())).norm();
}

Eigen::VectorXd text_embedding(const TaggerModel& model, const Dataset& dataset) {
  const FeatureMatrix features = extract_features(model, dataset);
  return features.values.colwise().mean().transpose();
}

TaskEmbedding task_embedding(const TaggerModel& model, const Dataset& dataset) {
  const long hidden_dim = static_cast<long>(model.dims().hidden_dim);
  Eigen::VectorXd hidden_block = Eigen::VectorXd::Zero(model.hidden_weights().size());
  Eigen::VectorXd output_block = Eigen::VectorXd::Zero(hidden_dim);
  std::size_t tokens = 0;
  for (const auto& sentence : dataset.splits.train) {
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      const auto gold = model.label_index(sentence.tokens[i].label);
      if (!gold) {
        throw ConfigError("task embedding: label '" + sentence.tokens[i].label + "' unknown to model '" +
                          model.id() + "'");
      }
      const auto features = featurize(sentence, i, model.dims().hash_dim);
      const TokenGradient g = model.token_gradient(features, *gold);
      // A feature bucket hit k times receives k * delta in this token's gradient.
      std::vector<std::uint32_t> sorted = features;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t a = 0; a < sorted.size();) {
        std::size_t b = a;
        while (b < sorted.size() && sorted[b] == sorted[a]) ++b;
        const double multiplicity = static_cast<double>(b - a);
        hidden_block.segment(static_cast<long>(sorted[a]) * hidden_dim, hidden_dim) +=
            (multiplicity * g.hidden_delta).cwiseAbs2();
        a = b;
      }
      output_block += g.hidden.cwiseAbs2() * g.logit_delta.squaredNorm();
      ++tokens;
    }
  }
  if (tokens == 0) throw ConfigError("task embedding of '" + dataset.id + "': empty train split");
  TaskEmbedding embedding;
  embedding.blocks["hidden"] = hidden_block / static_cast<double>(tokens);
  embedding.blocks["output"] = output_block / static_cast<double>(tokens);
  return embedding;
}

std::map<std::string, double> task_embedding_scores(const TaskEmbedding& target,
                                                    const std::map<std::string, TaskEmbedding>& sources,
                                                    double k) {
  std::vector<Ranking> rankings;
  for (const auto& [block, target_vec] : target.blocks) {
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& [source_id, embedding] : sources) {
      const auto it = embedding.blocks.find(block);
      if (it == embedding.blocks.end() || embedding.blocks.size() != target.blocks.size()) {
        throw DimensionError("task embedding of '" + source_id + "' has a different block structure");
      }
      scored.emplace_back(cosine_distance(std::span<const double>(it->second.data(), it->second.size()),
                                          std::span<const double>(target_vec.data(), target_vec.size())),
                          source_id);
    }
    std::sort(scored.begin(), scored.end());
    Ranking ranking{"TaskEmb:" + block, "", {}};
    for (const auto& [distance, id] : scored) ranking.sources.push_back(id);
    rankings.push_back(std::move(ranking));
  }
  return rrf_scores(rankings, k);
}

}  // namespace srcsel
