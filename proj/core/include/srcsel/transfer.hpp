#pragma once

// Transfer experiments: single-task baselines, zero-shot transfer, supervised
// domain adaptation and cross-task transfer, recorded as observations.

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "srcsel/corpus.hpp"
#include "srcsel/tagger.hpp"

namespace srcsel {

enum class Setting { SingleTask, ZeroShot, DomainAdapt, CrossTask };

std::string_view setting_name(Setting setting);
Setting parse_setting(std::string_view name);

struct Gain {
  double absolute = 0.0;
  /// Percent of the single-task score; absent when that score is 0.
  std::optional<double> relative;
};

Gain gain(double f1_single, double f1_transfer);

struct TransferObservation {
  Setting setting = Setting::SingleTask;
  std::vector<std::string> source_ids;  // sorted; empty for single-task rows
  std::string target_id;
  std::uint64_t seed = 0;
  double f1_single = 0.0;
  double f1_transfer = 0.0;
  double gain_abs = 0.0;
  std::optional<double> gain_rel;
};

/// Rounds both scores to the log precision (4 decimals) and derives the gains
/// from the rounded values, so a written log re-derives to identical text.
TransferObservation make_observation(Setting setting, std::vector<std::string> source_ids, std::string target_id,
                                     std::uint64_t seed, double f1_single, double f1_transfer);

/// Recomputes the gain fields from the two scores and compares at log precision.
bool gains_consistent(const TransferObservation& observation);

/// Identity of an observation: setting, source set, target and seed.
std::string observation_key(Setting setting, std::vector<std::string> source_ids, const std::string& target_id,
                            std::uint64_t seed);
std::string observation_key(const TransferObservation& observation);

/// Tab-separated, one observation per line after a header; scores at 4 decimals,
/// source sets comma-joined ("-" when empty), undefined relative gain as "NA".
void write_observation_log(std::ostream& out, std::span<const TransferObservation> observations);
void append_observation(std::ostream& out, const TransferObservation& observation);
std::vector<TransferObservation> read_observation_log(std::istream& in);

/// Deterministic log order: setting, source set, target, seed.
void sort_observations(std::vector<TransferObservation>& observations);

struct PairFilter {
  /// Tasks allowed as cross-task targets; empty allows all.
  std::set<std::string> cross_task_targets;
};

/// Why `source -> target` cannot run under `setting`, or nothing if it can.
/// Zero-shot and domain adaptation need identical label sets; cross-task
/// transfer needs different ones.
std::optional<std::string> incompatibility(Setting setting, const Dataset& source, const Dataset& target,
                                           const PairFilter& filter = {});

struct SkipRecord {
  Setting setting = Setting::ZeroShot;
  std::vector<std::string> source_ids;
  std::string target_id;
  std::string reason;
};

void write_skip_log(std::ostream& out, std::span<const SkipRecord> skipped);

struct ExperimentPlan {
  std::vector<Setting> settings{Setting::ZeroShot, Setting::DomainAdapt, Setting::CrossTask};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  PairFilter filter;
};

/// Runs transfer experiments over a fixed dataset collection, caching the
/// single-task model of every (dataset, seed).
class ExperimentRunner {
 public:
  ExperimentRunner(std::span<const Dataset> datasets, TrainConfig config, TaggerDims dims = {});

  const Dataset& dataset(const std::string& id) const;
  const TaggerModel& single_task_model(const std::string& dataset_id, std::uint64_t seed);

  /// Test-split F1 of the target's own model.
  double run_single_task(const std::string& target_id, std::uint64_t seed);
  TransferObservation single_task_observation(const std::string& target_id, std::uint64_t seed);

  TransferObservation run_pair(Setting setting, const std::string& source_id, const std::string& target_id,
                               std::uint64_t seed);

  /// Trains one model on the combined sources, then transfers it like run_pair.
  /// An empty source set yields the single-task score (no transfer).
  TransferObservation run_set(Setting setting, std::vector<std::string> source_ids, const std::string& target_id,
                              std::uint64_t seed);

  /// All (setting, ordered pair, seed) observations plus the single-task rows.
  /// Keys in `done` are skipped; incompatible pairs go to `skipped`.
  std::vector<TransferObservation> run_setting(const ExperimentPlan& plan, std::vector<SkipRecord>& skipped,
                                               const std::set<std::string>& done = {},
                                               const std::function<void(const TransferObservation&)>& on_result = {});

 private:
  TrainConfig config_for(std::uint64_t seed) const;
  double transfer_score(Setting setting, const TaggerModel& source_model, const Dataset& target, std::uint64_t seed) const;

  std::map<std::string, const Dataset*> datasets_;
  TrainConfig config_;
  TaggerDims dims_;
  std::map<std::pair<std::string, std::uint64_t>, TaggerModel> models_;
};

struct GainSummary {
  std::string group;
  std::size_t count = 0;
  std::size_t positive = 0;  // gain_abs > 0
  std::size_t negative = 0;  // gain_abs < 0
  double min_abs = 0.0;
  double mean_abs = 0.0;
  double max_abs = 0.0;
  std::optional<double> min_rel;
  std::optional<double> mean_rel;
  std::optional<double> max_rel;
};

/// Groups observations by `key` (groups in key order) and summarizes their gains.
std::vector<GainSummary> aggregate(std::span<const TransferObservation> observations,
                                   const std::function<std::string(const TransferObservation&)>& key);

}  // namespace srcsel
