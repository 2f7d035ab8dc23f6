#pragma once

// Stage commands behind the srcsel command-line tool. Each stage reads its
// inputs from and writes its outputs to the run's output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srcsel/kn_lm.hpp"
#include "srcsel/measures.hpp"
#include "srcsel/predict.hpp"
#include "srcsel/tagger.hpp"
#include "srcsel/transfer.hpp"

namespace srcsel::app {

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out = "out";
  /// Top-level seed; every random choice of a run derives from it.
  std::uint64_t seed = 1;
  /// Experiment repetitions; each number names one derived training stream.
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double theta = 0.5;
  std::vector<Measure> measures{std::begin(kAllMeasures), std::end(kAllMeasures)};
  std::vector<Setting> settings{Setting::ZeroShot, Setting::DomainAdapt, Setting::CrossTask};
  bool lowercase = false;
  std::optional<std::filesystem::path> sets_from;
  bool pooled = false;
  bool train_singles = false;
  /// Inputs of the meta-predictors, one feature per measure.
  std::vector<Measure> predictor_measures{Measure::ModelSim};
  std::vector<PredictorKind> predictors{PredictorKind::SVMC, PredictorKind::SVMR, PredictorKind::KNN,
                                        PredictorKind::LogReg, PredictorKind::LinReg};
  /// Rank baselines: Top-n for each n; "All" is always reported.
  std::vector<std::size_t> top_n{1};
  std::vector<std::string> cross_task_targets;
  Hyper hyper;
  TrainConfig train;
  TaggerDims dims;
  LmOptions lm;
  bool verbose = true;

  /// Throws ConfigError when a referenced path is missing or a value is out of range.
  void validate() const;
  TextOptions text() const { return TextOptions{lowercase}; }
};

/// Overlays the keys present in a JSON config file onto `config`. Relative
/// paths resolve against the config file's directory.
void apply_config_file(const std::filesystem::path& path, RunConfig& config);

struct DatasetSummary {
  std::string id;
  std::string task;
  std::string domain;
  std::size_t labels = 0;
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
  std::size_t train_tokens = 0;
};

/// Output locations inside a run directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path ingest() const { return root / "ingest.tsv"; }
  std::filesystem::path distances(Measure m) const;
  std::filesystem::path model(const std::string& dataset_id) const;
  std::filesystem::path reference_model() const { return root / "models" / "reference.model"; }
  std::filesystem::path features(const std::string& dataset_id) const;
  std::filesystem::path observations() const { return root / "observations.tsv"; }
  std::filesystem::path skipped() const { return root / "skipped.tsv"; }
  std::filesystem::path predictor_dir(Setting s) const;
  std::filesystem::path predictor(Setting s, PredictorKind kind, const std::optional<std::string>& target) const;
  std::filesystem::path selections() const { return root / "selections.tsv"; }
  std::filesystem::path selection_report() const { return root / "selections.txt"; }
  std::filesystem::path rankings() const { return root / "rankings.csv"; }
  std::filesystem::path ranking_summary() const { return root / "ranking_summary.csv"; }
  std::filesystem::path ranking_table() const { return root / "ranking_summary.txt"; }
  std::filesystem::path report_dir() const { return root / "report"; }
};

/// Exclusive claim on an output directory for the lifetime of the object.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& directory);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

std::vector<DatasetSummary> cmd_ingest(const RunConfig& config);
void cmd_measure(const RunConfig& config);
void cmd_observe(const RunConfig& config);
void cmd_fit(const RunConfig& config);
void cmd_select(const RunConfig& config);
void cmd_eval_rank(const RunConfig& config);
void cmd_report(const RunConfig& config);

/// Writes the bundled synthetic suite into `directory`.
std::filesystem::path cmd_synth(const std::filesystem::path& directory, std::uint64_t seed);

/// Every stage in order, including on-demand training of the selected source
/// combinations before the report.
void run_pipeline(const RunConfig& config);

}  // namespace srcsel::app
