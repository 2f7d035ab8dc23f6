#pragma once

// Corpus- and model-based similarity measures between a source and a target dataset.

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srcsel/corpus.hpp"
#include "srcsel/kn_lm.hpp"
#include "srcsel/model_sim.hpp"
#include "srcsel/tagger.hpp"

namespace srcsel {

enum class Measure { VocabOverlap, AnnotOverlap, DatasetSize, TermDistJSD, LMPerplexity, TextEmb, TaskEmb, ModelSim };

enum class Polarity { HigherIsCloser, LowerIsCloser };

inline constexpr Measure kAllMeasures[] = {Measure::VocabOverlap, Measure::AnnotOverlap, Measure::DatasetSize,
                                           Measure::TermDistJSD,  Measure::LMPerplexity, Measure::TextEmb,
                                           Measure::TaskEmb,      Measure::ModelSim};

std::string_view measure_name(Measure measure);
Measure parse_measure(std::string_view name);
std::string_view polarity_name(Polarity polarity);
Polarity parse_polarity(std::string_view name);

/// Fixed per measure. TaskEmb values are fused rank scores, so higher is closer.
Polarity polarity_of(Measure measure);
bool is_model_based(Measure measure);

struct DistanceRecord {
  Measure measure = Measure::VocabOverlap;
  std::string source_id;
  std::string target_id;
  double value = 0.0;
  Polarity polarity = Polarity::HigherIsCloser;
};

/// 100 * |V_t ∩ V_s| / |V_t| over train vocabularies. Asymmetric.
double vocab_overlap(const Dataset& source, const Dataset& target, const TextOptions& options = {});
/// vocab_overlap restricted to annotated (non-O) train words.
double annotation_overlap(const Dataset& source, const Dataset& target, const TextOptions& options = {});
/// Number of train sentences.
std::size_t dataset_size(const Dataset& source);

/// Base-2 Jensen-Shannon divergence over the union support, in [0, 1].
double jsd(const TermDistribution& p, const TermDistribution& q);

/// 1 - cos(u, v), in [0, 2]. Throws on zero vectors or unequal lengths.
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Trained models needed by the model-based measures.
struct ModelContext {
  /// Single-task model per dataset id.
  std::map<std::string, TaggerModel> models;
  /// Shared encoder applied to every dataset for text embeddings.
  std::optional<TaggerModel> reference;
  AlignOptions align;
};

struct MeasureContext {
  TextOptions text;
  LmOptions lm;
  SplitName perplexity_split = SplitName::Train;
  const ModelContext* models = nullptr;
};

/// One record per ordered (source, target) pair with source != target,
/// sorted by source id then target id. Errors name the failing pair.
std::vector<DistanceRecord> distance_matrix(std::span<const Dataset> datasets, Measure measure,
                                            const MeasureContext& context);

/// Long-form CSV: header `measure,source,target,value,polarity`, values at 6 decimals.
void write_distance_csv(std::ostream& out, std::span<const DistanceRecord> records);
std::vector<DistanceRecord> read_distance_csv(std::istream& in);

/// Sources for one target ordered closest first under the record polarity, ties by id.
Ranking rank_sources(std::span<const DistanceRecord> records, std::string_view target_id);

}  // namespace srcsel
