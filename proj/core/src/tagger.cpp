#include "srcsel/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "srcsel/common.hpp"

namespace srcsel {
namespace {

std::string lowercase_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// Byte offsets of UTF-8 code point starts.
std::vector<std::size_t> codepoint_starts(std::string_view text) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) starts.push_back(i);
  }
  return starts;
}

std::string word_shape(std::string_view text) {
  std::string shape;
  for (unsigned char c : text) {
    char s = 'x';
    if (c >= 'A' && c <= 'Z') s = 'X';
    else if (c >= '0' && c <= '9') s = 'd';
    else if (c < 0x80 && !(c >= 'a' && c <= 'z')) s = static_cast<char>(c);
    else if (c >= 0x80 && (c & 0xC0) == 0x80) continue;
    if (shape.empty() || shape.back() != s) shape.push_back(s);
  }
  return shape;
}

std::uint32_t bucket(std::string_view feature, std::size_t hash_dim) {
  return static_cast<std::uint32_t>(fnv1a(feature) % hash_dim);
}

void softmax_inplace(Eigen::VectorXd& logits) {
  const double max = logits.maxCoeff();
  logits = (logits.array() - max).exp();
  logits /= logits.sum();
}

std::vector<Sentence> interleave(const std::vector<const std::vector<Sentence>*>& parts) {
  std::vector<Sentence> out;
  std::size_t longest = 0;
  for (const auto* part : parts) longest = std::max(longest, part->size());
  for (std::size_t i = 0; i < longest; ++i) {
    for (const auto* part : parts) {
      if (i < part->size()) out.push_back((*part)[i]);
    }
  }
  return out;
}

void write_values(std::ostream& out, const double* data, std::size_t count, std::size_t per_line) {
  for (std::size_t i = 0; i < count; ++i) {
    out << format_sig12(data[i]) << ((i + 1) % per_line == 0 || i + 1 == count ? '\n' : ' ');
  }
}

void read_values(std::istream& in, double* data, std::size_t count) {
  std::string token;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> token)) throw ParseError("model file truncated", 0);
    data[i] = parse_double(token);
  }
}

void expect_keyword(std::istream& in, const std::string& keyword) {
  std::string word;
  if (!(in >> word) || word != keyword) {
    throw ParseError("model file: expected '" + keyword + "', got '" + word + "'", 0);
  }
}

}  // namespace

FeatureIndices featurize(const Sentence& sentence, std::size_t position, std::size_t hash_dim) {
  const std::string& text = sentence.tokens.at(position).text;
  const std::string lower = lowercase_ascii(text);
  const auto starts = codepoint_starts(lower);
  const std::size_t prefix_end = starts.size() > 3 ? starts[3] : lower.size();
  const std::size_t suffix_begin = starts.size() > 3 ? starts[starts.size() - 3] : 0;

  auto neighbor = [&](long offset) -> std::string {
    const long index = static_cast<long>(position) + offset;
    if (index < 0 || index >= static_cast<long>(sentence.tokens.size())) return "<pad>";
    return lowercase_ascii(sentence.tokens[static_cast<std::size_t>(index)].text);
  };

  FeatureIndices features;
  features.reserve(10);
  features.push_back(bucket("bias", hash_dim));
  features.push_back(bucket("w=" + text, hash_dim));
  features.push_back(bucket("l=" + lower, hash_dim));
  features.push_back(bucket("p3=" + lower.substr(0, prefix_end), hash_dim));
  features.push_back(bucket("s3=" + lower.substr(suffix_begin), hash_dim));
  features.push_back(bucket("sh=" + word_shape(text), hash_dim));
  features.push_back(bucket("w-2=" + neighbor(-2), hash_dim));
  features.push_back(bucket("w-1=" + neighbor(-1), hash_dim));
  features.push_back(bucket("w+1=" + neighbor(1), hash_dim));
  features.push_back(bucket("w+2=" + neighbor(2), hash_dim));
  return features;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

TaggerModel TaggerModel::initialize(std::string id, std::vector<std::string> labels, std::uint64_t seed,
                                    TaggerDims dims) {
  if (labels.empty()) throw ConfigError("tagger needs at least one label");
  if (dims.hash_dim == 0 || dims.hidden_dim == 0) throw ConfigError("tagger dimensions must be positive");
  TaggerModel model;
  model.id_ = std::move(id);
  model.labels_ = std::move(labels);
  model.seed_ = seed;
  model.dims_ = dims;

  Rng hidden_rng(derive_seed(seed, "hidden-init"));
  model.hidden_weights_.resize(static_cast<long>(dims.hash_dim), static_cast<long>(dims.hidden_dim));
  for (long r = 0; r < model.hidden_weights_.rows(); ++r) {
    for (long c = 0; c < model.hidden_weights_.cols(); ++c) model.hidden_weights_(r, c) = hidden_rng.uniform(-0.1, 0.1);
  }
  const TaggerModel with_head = swap_head(model, model.labels_, derive_seed(seed, "head-init"));
  model.head_weights_ = with_head.head_weights_;
  model.head_bias_ = with_head.head_bias_;
  model.canonicalize();
  return model;
}

bool TaggerModel::span_labels() const {
  std::set<std::string> tags;
  for (const auto& l : labels_) {
    if (l != kOutsideLabel) tags.insert(l);
  }
  return tags.empty() || is_span_labeling(tags);
}

std::optional<std::size_t> TaggerModel::label_index(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

Eigen::VectorXd TaggerModel::hidden(const FeatureIndices& features) const {
  Eigen::VectorXd pre = Eigen::VectorXd::Zero(static_cast<long>(dims_.hidden_dim));
  for (std::uint32_t f : features) pre += hidden_weights_.row(f).transpose();
  return pre.cwiseMax(0.0);
}

Eigen::VectorXd TaggerModel::probabilities(const FeatureIndices& features) const {
  Eigen::VectorXd logits = head_weights_.transpose() * hidden(features) + head_bias_;
  softmax_inplace(logits);
  return logits;
}

TokenGradient TaggerModel::token_gradient(const FeatureIndices& features, std::size_t gold) const {
  Eigen::VectorXd pre = Eigen::VectorXd::Zero(static_cast<long>(dims_.hidden_dim));
  for (std::uint32_t f : features) pre += hidden_weights_.row(f).transpose();
  TokenGradient g;
  g.hidden = pre.cwiseMax(0.0);
  Eigen::VectorXd probs = head_weights_.transpose() * g.hidden + head_bias_;
  softmax_inplace(probs);
  g.loss = -std::log(std::max(probs(static_cast<long>(gold)), 1e-300));
  g.logit_delta = probs;
  g.logit_delta(static_cast<long>(gold)) -= 1.0;
  g.hidden_delta = (head_weights_ * g.logit_delta).array() * (pre.array() > 0.0).cast<double>();
  return g;
}

void TaggerModel::sgd_step(const FeatureIndices& features, std::size_t gold, double rate, double& loss_out) {
  const TokenGradient g = token_gradient(features, gold);
  loss_out += g.loss;
  head_weights_.noalias() -= rate * g.hidden * g.logit_delta.transpose();
  head_bias_ -= rate * g.logit_delta;
  for (std::uint32_t f : features) hidden_weights_.row(f) -= rate * g.hidden_delta.transpose();
}

std::vector<std::string> TaggerModel::predict(const Sentence& sentence) const {
  std::vector<std::string> out;
  out.reserve(sentence.tokens.size());
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const Eigen::VectorXd probs = probabilities(featurize(sentence, i, dims_.hash_dim));
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    out.push_back(labels_[static_cast<std::size_t>(best)]);
  }
  return out;
}

double TaggerModel::loss(const Sentence& sentence) const {
  double total = 0.0;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const auto gold = label_index(sentence.tokens[i].label);
    if (!gold) throw ConfigError("label '" + sentence.tokens[i].label + "' unknown to model '" + id_ + "'");
    total += token_gradient(featurize(sentence, i, dims_.hash_dim), *gold).loss;
  }
  return total;
}

std::size_t TaggerModel::parameter_count() const noexcept {
  return static_cast<std::size_t>(hidden_weights_.size() + head_weights_.size() + head_bias_.size());
}

double TaggerModel::parameter(std::size_t index) const {
  const auto hidden_size = static_cast<std::size_t>(hidden_weights_.size());
  const auto head_size = static_cast<std::size_t>(head_weights_.size());
  if (index < hidden_size) return hidden_weights_.data()[index];
  index -= hidden_size;
  if (index < head_size) return head_weights_.data()[index];
  index -= head_size;
  if (index < static_cast<std::size_t>(head_bias_.size())) return head_bias_(static_cast<long>(index));
  throw DimensionError("parameter index out of range");
}

void TaggerModel::set_parameter(std::size_t index, double value) {
  const auto hidden_size = static_cast<std::size_t>(hidden_weights_.size());
  const auto head_size = static_cast<std::size_t>(head_weights_.size());
  if (index < hidden_size) {
    hidden_weights_.data()[index] = value;
    return;
  }
  index -= hidden_size;
  if (index < head_size) {
    head_weights_.data()[index] = value;
    return;
  }
  index -= head_size;
  if (index < static_cast<std::size_t>(head_bias_.size())) {
    head_bias_(static_cast<long>(index)) = value;
    return;
  }
  throw DimensionError("parameter index out of range");
}

Eigen::VectorXd TaggerModel::gradient(const Sentence& sentence) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<long>(parameter_count()));
  const long hidden_dim = static_cast<long>(dims_.hidden_dim);
  const long head_offset = hidden_weights_.size();
  const long bias_offset = head_offset + head_weights_.size();
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const auto gold = label_index(sentence.tokens[i].label);
    if (!gold) throw ConfigError("label '" + sentence.tokens[i].label + "' unknown to model '" + id_ + "'");
    const auto features = featurize(sentence, i, dims_.hash_dim);
    const TokenGradient g = token_gradient(features, *gold);
    for (std::uint32_t f : features) grad.segment(static_cast<long>(f) * hidden_dim, hidden_dim) += g.hidden_delta;
    const Eigen::MatrixXd head = g.hidden * g.logit_delta.transpose();
    grad.segment(head_offset, head.size()) += Eigen::Map<const Eigen::VectorXd>(head.data(), head.size());
    grad.segment(bias_offset, g.logit_delta.size()) += g.logit_delta;
  }
  return grad;
}

void TaggerModel::canonicalize() {
  for (long i = 0; i < hidden_weights_.size(); ++i) hidden_weights_.data()[i] = round_sig12(hidden_weights_.data()[i]);
  for (long i = 0; i < head_weights_.size(); ++i) head_weights_.data()[i] = round_sig12(head_weights_.data()[i]);
  for (long i = 0; i < head_bias_.size(); ++i) head_bias_(i) = round_sig12(head_bias_(i));
}

void TaggerModel::save(std::ostream& out) const {
  out << "srcsel-tagger 1\n";
  out << "id " << id_ << '\n';
  out << "seed " << seed_ << '\n';
  out << "hash_dim " << dims_.hash_dim << '\n';
  out << "hidden_dim " << dims_.hidden_dim << '\n';
  out << "labels " << labels_.size();
  for (const auto& l : labels_) out << ' ' << l;
  out << '\n';
  out << "hidden_weights\n";
  write_values(out, hidden_weights_.data(), static_cast<std::size_t>(hidden_weights_.size()), dims_.hidden_dim);
  out << "head_weights\n";
  write_values(out, head_weights_.data(), static_cast<std::size_t>(head_weights_.size()), dims_.hidden_dim);
  out << "head_bias\n";
  write_values(out, head_bias_.data(), static_cast<std::size_t>(head_bias_.size()), labels_.size());
  out << "log " << log_.size() << '\n';
  for (const auto& record : log_) {
    out << record.epoch << ' ' << format_sig12(record.train_loss) << ' ' << format_sig12(record.dev_score) << '\n';
  }
}

TaggerModel TaggerModel::load(std::istream& in) {
  TaggerModel model;
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "srcsel-tagger" || version != 1) {
    throw ParseError("not a srcsel tagger model file", 0);
  }
  expect_keyword(in, "id");
  in >> model.id_;
  expect_keyword(in, "seed");
  in >> model.seed_;
  expect_keyword(in, "hash_dim");
  in >> model.dims_.hash_dim;
  expect_keyword(in, "hidden_dim");
  in >> model.dims_.hidden_dim;
  expect_keyword(in, "labels");
  std::size_t label_count = 0;
  in >> label_count;
  model.labels_.resize(label_count);
  for (auto& l : model.labels_) in >> l;
  if (!in || label_count == 0 || model.dims_.hash_dim == 0 || model.dims_.hidden_dim == 0) {
    throw ParseError("model file: bad header", 0);
  }
  const auto rows = static_cast<long>(model.dims_.hash_dim);
  const auto hidden = static_cast<long>(model.dims_.hidden_dim);
  const auto labels = static_cast<long>(label_count);
  expect_keyword(in, "hidden_weights");
  model.hidden_weights_.resize(rows, hidden);
  read_values(in, model.hidden_weights_.data(), static_cast<std::size_t>(rows * hidden));
  expect_keyword(in, "head_weights");
  model.head_weights_.resize(hidden, labels);
  read_values(in, model.head_weights_.data(), static_cast<std::size_t>(hidden * labels));
  expect_keyword(in, "head_bias");
  model.head_bias_.resize(labels);
  read_values(in, model.head_bias_.data(), label_count);
  expect_keyword(in, "log");
  std::size_t entries = 0;
  in >> entries;
  for (std::size_t i = 0; i < entries; ++i) {
    EpochRecord record;
    std::string loss, score;
    in >> record.epoch >> loss >> score;
    if (!in) throw ParseError("model file: truncated training log", 0);
    record.train_loss = parse_double(loss);
    record.dev_score = parse_double(score);
    model.log_.push_back(record);
  }
  return model;
}

std::vector<std::string> tagger_labels(const Dataset& dataset) {
  std::vector<std::string> labels{std::string(kOutsideLabel)};
  labels.insert(labels.end(), dataset.label_set.begin(), dataset.label_set.end());
  return labels;
}

PrfScore evaluate(const TaggerModel& model, std::span<const Sentence> sentences) {
  std::vector<std::vector<std::string>> gold;
  std::vector<std::vector<std::string>> predicted;
  gold.reserve(sentences.size());
  predicted.reserve(sentences.size());
  for (const auto& sentence : sentences) {
    std::vector<std::string> g;
    for (const auto& token : sentence.tokens) g.push_back(token.label);
    gold.push_back(std::move(g));
    predicted.push_back(model.predict(sentence));
  }
  if (model.span_labels()) return micro_f1(decode_spans(gold), decode_spans(predicted));
  std::vector<std::string> flat_gold, flat_pred;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    flat_gold.insert(flat_gold.end(), gold[s].begin(), gold[s].end());
    flat_pred.insert(flat_pred.end(), predicted[s].begin(), predicted[s].end());
  }
  const double acc = token_accuracy(flat_gold, flat_pred);
  return {acc, acc, acc};
}

TaggerModel train_loop(TaggerModel model, std::span<const Sentence> train_set, std::span<const Sentence> dev_set,
                       const TrainConfig& config) {
  config.validate();
  if (train_set.empty() || dev_set.empty()) throw ConfigError("training needs non-empty train and dev splits");

  struct Example {
    FeatureIndices features;
    std::size_t gold;
  };
  std::vector<std::vector<Example>> examples;
  examples.reserve(train_set.size());
  for (const auto& sentence : train_set) {
    std::vector<Example> row;
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      const auto gold = model.label_index(sentence.tokens[i].label);
      if (!gold) {
        throw ConfigError("label '" + sentence.tokens[i].label + "' unknown to model '" + model.id() + "'");
      }
      row.push_back({featurize(sentence, i, model.dims_.hash_dim), *gold});
    }
    examples.push_back(std::move(row));
  }

  Rng rng(derive_seed(config.seed, "sgd-order"));
  std::vector<EpochRecord> log;
  TaggerModel best = model;
  double best_score = evaluate(model, dev_set).f1;
  log.push_back({0, 0.0, best_score});
  std::vector<std::size_t> order(examples.size());
  int stale = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double loss = 0.0;
    std::size_t tokens = 0;
    for (std::size_t index : order) {
      for (const auto& example : examples[index]) {
        model.sgd_step(example.features, example.gold, config.learning_rate, loss);
        ++tokens;
      }
    }
    const double score = evaluate(model, dev_set).f1;
    log.push_back({epoch, tokens > 0 ? loss / static_cast<double>(tokens) : 0.0, score});
    if (score > best_score) {
      best_score = score;
      best = model;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  best.log_ = std::move(log);
  best.canonicalize();
  return best;
}

TaggerModel train(const Dataset& dataset, const TrainConfig& config, TaggerDims dims) {
  config.validate();
  TaggerModel model = TaggerModel::initialize(dataset.id, tagger_labels(dataset), config.seed, dims);
  return train_loop(std::move(model), dataset.splits.train, dataset.splits.dev, config);
}

void require_same_labels(const TaggerModel& model, const Dataset& target) {
  const std::set<std::string> have(model.labels().begin(), model.labels().end());
  const auto wanted_list = tagger_labels(target);
  const std::set<std::string> wanted(wanted_list.begin(), wanted_list.end());
  if (have == wanted) return;
  std::vector<std::string> missing, extra;
  std::set_difference(wanted.begin(), wanted.end(), have.begin(), have.end(), std::back_inserter(missing));
  std::set_difference(have.begin(), have.end(), wanted.begin(), wanted.end(), std::back_inserter(extra));
  throw ConfigError("label sets differ between model '" + model.id() + "' and dataset '" + target.id +
                    "': missing in model [" + join(missing, " ") + "], absent from dataset [" + join(extra, " ") + "]");
}

PrfScore zero_shot_apply(const TaggerModel& model, const Dataset& target) {
  require_same_labels(model, target);
  return evaluate(model, target.splits.test);
}

TaggerModel fine_tune(const TaggerModel& model, const Dataset& target, const TrainConfig& config) {
  config.validate();
  require_same_labels(model, target);
  TrainConfig tuned = config;
  tuned.seed = derive_seed(config.seed, "fine-tune");
  return train_loop(model, target.splits.train, target.splits.dev, tuned);
}

TaggerModel swap_head(const TaggerModel& model, std::vector<std::string> labels, std::uint64_t seed) {
  if (labels.empty()) throw ConfigError("swap_head needs a non-empty label set");
  TaggerModel out = model;
  out.labels_ = std::move(labels);
  const long hidden = static_cast<long>(out.dims_.hidden_dim);
  const long count = static_cast<long>(out.labels_.size());
  const double bound = std::sqrt(6.0 / static_cast<double>(hidden + count));
  Rng rng(derive_seed(seed, "head"));
  out.head_weights_.resize(hidden, count);
  for (long c = 0; c < count; ++c) {
    for (long r = 0; r < hidden; ++r) out.head_weights_(r, c) = rng.uniform(-bound, bound);
  }
  out.head_bias_ = Eigen::VectorXd::Zero(count);
  out.log_.clear();
  out.canonicalize();
  return out;
}

std::optional<TaggerModel> train_multi(std::span<const Dataset* const> sources, const TrainConfig& config,
                                       TaggerDims dims, bool union_labels) {
  if (sources.empty()) return std::nullopt;
  std::set<std::string> labels;
  std::vector<const std::vector<Sentence>*> trains, devs;
  std::vector<std::string> ids;
  for (const Dataset* source : sources) {
    if (!union_labels && source->label_set != sources.front()->label_set) {
      throw ConfigError("train_multi: '" + source->id + "' has a different label set than '" +
                        sources.front()->id + "'");
    }
    labels.insert(source->label_set.begin(), source->label_set.end());
    trains.push_back(&source->splits.train);
    devs.push_back(&source->splits.dev);
    ids.push_back(source->id);
  }
  config.validate();
  std::vector<std::string> head{std::string(kOutsideLabel)};
  head.insert(head.end(), labels.begin(), labels.end());
  TaggerModel model = TaggerModel::initialize(join(ids, "+"), std::move(head), config.seed, dims);
  const auto train_set = interleave(trains);
  const auto dev_set = interleave(devs);
  return train_loop(std::move(model), train_set, dev_set, config);
}

}  // namespace srcsel
