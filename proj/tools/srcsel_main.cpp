#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "app/app.hpp"
#include "srcsel/common.hpp"

namespace {

template <typename T, typename Parse>
std::vector<T> parse_names(const std::vector<std::string>& names, Parse parse) {
  std::vector<T> out;
  for (const auto& name : names) out.push_back(parse(name));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace srcsel;

  CLI::App cli{"Similarity measures, transfer experiments and source-set selection for sequence labeling"};
  cli.require_subcommand(1);
  cli.fallthrough();

  std::string config_path;
  std::string manifest, out;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;
  double theta = 0.5;
  std::vector<std::string> measures, settings, predictors, predictor_measures, cross_task_targets;
  std::vector<std::size_t> top_n;
  std::string sets_from;
  bool lowercase = false, pooled = false, train_singles = false, quiet = false;

  auto* o_config = cli.add_option("--config", config_path, "JSON config file; flags override its values");
  auto* o_manifest = cli.add_option("--manifest", manifest, "Dataset manifest");
  auto* o_out = cli.add_option("--out", out, "Output directory");
  auto* o_seed = cli.add_option("--seed", seed, "Top-level seed for every random choice");
  auto* o_seeds = cli.add_option("--seeds", seeds, "Experiment seed numbers")->delimiter(',');
  auto* o_theta = cli.add_option("--theta", theta, "Gain threshold in F1 points (default 0.5)");
  auto* o_measures = cli.add_option("--measures", measures, "Similarity measures")->delimiter(',');
  auto* o_settings = cli.add_option("--settings", settings, "ZeroShot, DomainAdapt, CrossTask")->delimiter(',');
  auto* o_lower = cli.add_flag("--lowercase", lowercase, "Lowercase tokens for corpus measures");
  auto* o_sets = cli.add_option("--sets-from", sets_from, "Selection file whose source sets to train");
  auto* o_pooled = cli.add_flag("--pooled", pooled, "Fit one predictor on all targets");
  auto* o_predictors = cli.add_option("--predictors", predictors, "SVMC, SVMR, KNN, LogReg, LinReg")->delimiter(',');
  auto* o_pmeasures =
      cli.add_option("--predictor-measures", predictor_measures, "Measures used as predictor inputs")->delimiter(',');
  auto* o_topn = cli.add_option("--top-n", top_n, "Top-n baselines")->delimiter(',');
  auto* o_cross = cli.add_option("--cross-task-targets", cross_task_targets, "Tasks allowed as cross-task targets")
                      ->delimiter(',');
  cli.add_flag("--quiet", quiet, "Suppress progress messages");

  auto* ingest = cli.add_subcommand("ingest", "Validate the manifest and summarize datasets");
  auto* measure = cli.add_subcommand("measure", "Compute distance matrices");
  auto* observe = cli.add_subcommand("observe", "Run transfer experiments");
  observe->add_flag("--train-singles", train_singles, "Only train the single-task models");
  auto* fit = cli.add_subcommand("fit", "Fit gain predictors");
  auto* select = cli.add_subcommand("select", "Select source sets per target");
  auto* eval_rank = cli.add_subcommand("eval-rank", "Score measure rankings against observed transfer");
  auto* report = cli.add_subcommand("report", "Evaluate selections and summarize gains");
  auto* synth = cli.add_subcommand("synth", "Write the synthetic fixture suite to --out");
  auto* pipeline = cli.add_subcommand("pipeline", "Run every stage in order");
  for (auto* sub : {ingest, measure, observe, fit, select, eval_rank, report, synth, pipeline}) sub->fallthrough();

  CLI11_PARSE(cli, argc, argv);

  try {
    app::RunConfig config;
    if (*o_config) app::apply_config_file(config_path, config);
    if (*o_manifest) config.manifest = manifest;
    if (*o_out) config.out = out;
    if (*o_seed) config.seed = seed;
    if (*o_seeds) config.seeds = seeds;
    if (*o_theta) config.theta = theta;
    if (*o_measures) config.measures = parse_names<Measure>(measures, parse_measure);
    if (*o_settings) config.settings = parse_names<Setting>(settings, parse_setting);
    if (*o_lower) config.lowercase = lowercase;
    if (*o_sets) config.sets_from = sets_from;
    if (*o_pooled) config.pooled = pooled;
    if (*o_predictors) config.predictors = parse_names<PredictorKind>(predictors, parse_predictor_kind);
    if (*o_pmeasures) config.predictor_measures = parse_names<Measure>(predictor_measures, parse_measure);
    if (*o_topn) config.top_n = top_n;
    if (*o_cross) config.cross_task_targets = cross_task_targets;
    config.train_singles = train_singles;
    config.verbose = !quiet;

    if (*synth) {
      const auto path = app::cmd_synth(config.out, config.seed);
      if (config.verbose) std::cerr << "srcsel: wrote " << path.string() << '\n';
    } else if (*ingest) {
      app::cmd_ingest(config);
    } else if (*measure) {
      app::cmd_measure(config);
    } else if (*observe) {
      app::cmd_observe(config);
    } else if (*fit) {
      app::cmd_fit(config);
    } else if (*select) {
      app::cmd_select(config);
    } else if (*eval_rank) {
      app::cmd_eval_rank(config);
    } else if (*report) {
      app::cmd_report(config);
    } else if (*pipeline) {
      app::run_pipeline(config);
    }
  } catch (const std::exception& e) {
    std::cerr << "srcsel: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
