#include "srcsel/measures.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "srcsel/common.hpp"

namespace srcsel {
namespace {

double coverage_percent(const std::set<std::string>& source, const std::set<std::string>& target,
                        const char* what) {
  if (target.empty()) throw ConfigError(std::string(what) + ": target vocabulary is empty");
  std::size_t covered = 0;
  for (const auto& term : target) covered += source.count(term);
  return 100.0 * static_cast<double>(covered) / static_cast<double>(target.size());
}

const TaggerModel& model_for(const ModelContext& context, const std::string& dataset_id) {
  const auto it = context.models.find(dataset_id);
  if (it == context.models.end()) {
    throw DependencyError("no trained model for dataset '" + dataset_id + "'");
  }
  return it->second;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string_view measure_name(Measure measure) {
  switch (measure) {
    case Measure::VocabOverlap: return "VocabOverlap";
    case Measure::AnnotOverlap: return "AnnotOverlap";
    case Measure::DatasetSize: return "DatasetSize";
    case Measure::TermDistJSD: return "TermDistJSD";
    case Measure::LMPerplexity: return "LMPerplexity";
    case Measure::TextEmb: return "TextEmb";
    case Measure::TaskEmb: return "TaskEmb";
    case Measure::ModelSim: return "ModelSim";
  }
  return "VocabOverlap";
}

Measure parse_measure(std::string_view name) {
  for (Measure m : kAllMeasures) {
    if (measure_name(m) == name) return m;
  }
  throw ConfigError("unknown measure '" + std::string(name) + "'");
}

std::string_view polarity_name(Polarity polarity) {
  return polarity == Polarity::HigherIsCloser ? "HigherIsCloser" : "LowerIsCloser";
}

Polarity parse_polarity(std::string_view name) {
  if (name == "HigherIsCloser") return Polarity::HigherIsCloser;
  if (name == "LowerIsCloser") return Polarity::LowerIsCloser;
  throw ConfigError("unknown polarity '" + std::string(name) + "'");
}

Polarity polarity_of(Measure measure) {
  switch (measure) {
    case Measure::VocabOverlap:
    case Measure::AnnotOverlap:
    case Measure::DatasetSize:
    case Measure::TaskEmb:
      return Polarity::HigherIsCloser;
    default:
      return Polarity::LowerIsCloser;
  }
}

bool is_model_based(Measure measure) {
  return measure == Measure::TextEmb || measure == Measure::TaskEmb || measure == Measure::ModelSim;
}

double vocab_overlap(const Dataset& source, const Dataset& target, const TextOptions& options) {
  return coverage_percent(vocabulary(source, {}, options), vocabulary(target, {}, options), "vocab_overlap");
}

double annotation_overlap(const Dataset& source, const Dataset& target, const TextOptions& options) {
  return coverage_percent(annotated_vocabulary(source, options), annotated_vocabulary(target, options),
                          "annotation_overlap");
}

std::size_t dataset_size(const Dataset& source) { return source.splits.train.size(); }

double jsd(const TermDistribution& p, const TermDistribution& q) {
  // Sum in sorted-term order so the result is independent of container details.
  auto kl_to_mixture = [](double a, double b) {
    if (a <= 0.0) return 0.0;
    return a * std::log2(a / (0.5 * (a + b)));
  };
  double total = 0.0;
  auto pi = p.probs.begin();
  auto qi = q.probs.begin();
  while (pi != p.probs.end() || qi != q.probs.end()) {
    double a = 0.0, b = 0.0;
    if (qi == q.probs.end() || (pi != p.probs.end() && pi->first < qi->first)) {
      a = pi->second;
      ++pi;
    } else if (pi == p.probs.end() || qi->first < pi->first) {
      b = qi->second;
      ++qi;
    } else {
      a = pi->second;
      b = qi->second;
      ++pi;
      ++qi;
    }
    total += 0.5 * kl_to_mixture(a, b) + 0.5 * kl_to_mixture(b, a);
  }
  return std::clamp(total, 0.0, 1.0);
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine_distance: lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw ConfigError("cosine_distance: zero vector");
  return std::clamp(1.0 - dot / (std::sqrt(nu) * std::sqrt(nv)), 0.0, 2.0);
}

std::vector<DistanceRecord> distance_matrix(std::span<const Dataset> datasets, Measure measure,
                                            const MeasureContext& context) {
  if (datasets.size() < 2) throw ConfigError("distance_matrix needs at least 2 datasets");
  if (is_model_based(measure) && context.models == nullptr) {
    throw DependencyError(std::string(measure_name(measure)) + " requires trained single-task models");
  }

  std::vector<const Dataset*> ordered;
  for (const auto& d : datasets) ordered.push_back(&d);
  std::sort(ordered.begin(), ordered.end(), [](const Dataset* a, const Dataset* b) { return a->id < b->id; });

  // Per-dataset precomputation (what each measure reuses across pairs).
  std::map<std::string, TermDistribution> distributions;
  std::map<std::string, NGramLM> lms;
  std::map<std::string, std::vector<double>> text_embeddings;
  std::map<std::string, TaskEmbedding> task_embeddings;
  std::map<std::string, FeatureMatrix> target_features;
  auto tag = [&](const std::string& what, const std::string& id, const auto& action) {
    try {
      action();
    } catch (const DependencyError& e) {
      throw DependencyError(std::string(measure_name(measure)) + ": " + what + " '" + id + "': " + e.what());
    } catch (const Error& e) {
      throw ConfigError(std::string(measure_name(measure)) + ": " + what + " '" + id + "': " + e.what());
    }
  };
  for (const Dataset* d : ordered) {
    switch (measure) {
      case Measure::TermDistJSD:
        tag("dataset", d->id, [&] { distributions.emplace(d->id, term_distribution(*d, context.text)); });
        break;
      case Measure::LMPerplexity:
        tag("dataset", d->id, [&] {
          LmOptions lm = context.lm;
          lm.text = context.text;
          lms.emplace(d->id, train_kn_lm(*d, lm));
        });
        break;
      case Measure::TextEmb:
        if (!context.models->reference) throw DependencyError("TextEmb requires the shared reference encoder");
        tag("dataset", d->id, [&] { text_embeddings.emplace(d->id, to_vector(text_embedding(*context.models->reference, *d))); });
        break;
      case Measure::TaskEmb:
        tag("dataset", d->id, [&] { task_embeddings.emplace(d->id, task_embedding(model_for(*context.models, d->id), *d)); });
        break;
      case Measure::ModelSim:
        tag("dataset", d->id, [&] { target_features.emplace(d->id, extract_features(model_for(*context.models, d->id), *d)); });
        break;
      default:
        break;
    }
  }

  // Fused task-embedding scores depend on every candidate source of a target.
  std::map<std::string, std::map<std::string, double>> fused;
  if (measure == Measure::TaskEmb) {
    for (const Dataset* target : ordered) {
      std::map<std::string, TaskEmbedding> sources;
      for (const Dataset* source : ordered) {
        if (source != target) sources.emplace(source->id, task_embeddings.at(source->id));
      }
      tag("target", target->id, [&] { fused[target->id] = task_embedding_scores(task_embeddings.at(target->id), sources); });
    }
  }

  std::vector<DistanceRecord> records;
  for (const Dataset* source : ordered) {
    for (const Dataset* target : ordered) {
      if (source == target) continue;
      DistanceRecord record{measure, source->id, target->id, 0.0, polarity_of(measure)};
      tag("pair", source->id + " -> " + target->id, [&] {
        switch (measure) {
          case Measure::VocabOverlap: record.value = vocab_overlap(*source, *target, context.text); break;
          case Measure::AnnotOverlap: record.value = annotation_overlap(*source, *target, context.text); break;
          case Measure::DatasetSize: record.value = static_cast<double>(dataset_size(*source)); break;
          case Measure::TermDistJSD:
            record.value = jsd(distributions.at(source->id), distributions.at(target->id));
            break;
          case Measure::LMPerplexity:
            record.value = perplexity(lms.at(source->id), *target, context.perplexity_split);
            break;
          case Measure::TextEmb:
            record.value = cosine_distance(text_embeddings.at(source->id), text_embeddings.at(target->id));
            break;
          case Measure::TaskEmb: record.value = fused.at(target->id).at(source->id); break;
          case Measure::ModelSim: {
            const FeatureMatrix source_features = extract_features(model_for(*context.models, source->id), *target);
            record.value = model_distance(
                procrustes_align(source_features, target_features.at(target->id), context.models->align));
            break;
          }
        }
        if (!std::isfinite(record.value)) throw Error("non-finite value");
      });
      records.push_back(std::move(record));
    }
  }
  return records;
}

void write_distance_csv(std::ostream& out, std::span<const DistanceRecord> records) {
  out << "measure,source,target,value,polarity\n";
  for (const auto& r : records) {
    out << measure_name(r.measure) << ',' << r.source_id << ',' << r.target_id << ',' << format_fixed(r.value, 6)
        << ',' << polarity_name(r.polarity) << '\n';
  }
}

std::vector<DistanceRecord> read_distance_csv(std::istream& in) {
  std::vector<DistanceRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line_number == 1) {
      if (trim(line) != "measure,source,target,value,polarity") throw ParseError("distance file: bad header", 1);
      continue;
    }
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line), ',');
    if (fields.size() != 5) throw ParseError("distance file: expected 5 fields", line_number);
    try {
      records.push_back(DistanceRecord{parse_measure(fields[0]), fields[1], fields[2], parse_double(fields[3]),
                                       parse_polarity(fields[4])});
    } catch (const Error& e) {
      throw ParseError(std::string("distance file: ") + e.what(), line_number);
    }
  }
  return records;
}

Ranking rank_sources(std::span<const DistanceRecord> records, std::string_view target_id) {
  std::vector<const DistanceRecord*> relevant;
  for (const auto& r : records) {
    if (r.target_id == target_id) relevant.push_back(&r);
  }
  std::sort(relevant.begin(), relevant.end(), [](const DistanceRecord* a, const DistanceRecord* b) {
    if (a->value != b->value) {
      return a->polarity == Polarity::HigherIsCloser ? a->value > b->value : a->value < b->value;
    }
    return a->source_id < b->source_id;
  });
  Ranking ranking;
  ranking.target_id = std::string(target_id);
  if (!relevant.empty()) ranking.measure = std::string(measure_name(relevant.front()->measure));
  for (const auto* r : relevant) ranking.sources.push_back(r->source_id);
  return ranking;
}

}  // namespace srcsel
