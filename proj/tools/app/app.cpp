#include "app.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "srcsel/common.hpp"
#include "srcsel/corpus.hpp"
#include "srcsel/evalrank.hpp"
#include "srcsel/model_sim.hpp"
#include "srcsel/synth.hpp"

namespace srcsel::app {
namespace fs = std::filesystem;
namespace {

void note(const RunConfig& config, const std::string& message) {
  if (config.verbose) std::cerr << "srcsel: " << message << '\n';
}

/// Writes through a temporary file and a rename, so readers never see a partial file.
void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ConfigError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::ifstream open_input(const fs::path& path, const std::string& producer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing " + path.string() + " (produced by `srcsel " + producer + "`)");
  return in;
}

std::vector<Dataset> load_datasets(const RunConfig& config) { return load_manifest(config.manifest); }

std::vector<TransferObservation> load_observations(const Layout& layout) {
  auto in = open_input(layout.observations(), "observe");
  return read_observation_log(in);
}

std::vector<DistanceRecord> load_distances(const Layout& layout, Measure m) {
  auto in = open_input(layout.distances(m), "measure --measures " + std::string(measure_name(m)));
  return read_distance_csv(in);
}

std::vector<std::vector<DistanceRecord>> load_predictor_inputs(const RunConfig& config, const Layout& layout) {
  std::vector<std::vector<DistanceRecord>> out;
  for (Measure m : config.predictor_measures) out.push_back(load_distances(layout, m));
  return out;
}

TaggerModel load_model(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DependencyError("missing " + what + " model " + path.string() + "; run `srcsel observe --train-singles` first");
  }
  return TaggerModel::load(in);
}

ExperimentRunner make_runner(const RunConfig& config, const std::vector<Dataset>& datasets) {
  TrainConfig train = config.train;
  train.seed = config.seed;
  return ExperimentRunner(datasets, train, config.dims);
}

std::string gains_text(double value) { return format_fixed(value, 4); }

const Dataset& find_dataset(const std::vector<Dataset>& datasets, const std::string& id) {
  for (const auto& d : datasets) {
    if (d.id == id) return d;
  }
  throw ConfigError("dataset '" + id + "' is not in the manifest");
}

PairFilter pair_filter(const RunConfig& config) {
  PairFilter filter;
  filter.cross_task_targets.insert(config.cross_task_targets.begin(), config.cross_task_targets.end());
  return filter;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const nlohmann::json& j, Parse parse) {
  std::vector<T> out;
  for (const auto& item : j) out.push_back(parse(item.get<std::string>()));
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (manifest.empty()) throw ConfigError("no manifest given (--manifest)");
  if (!fs::exists(manifest)) throw ConfigError("manifest not found: " + manifest.string());
  if (out.empty()) throw ConfigError("no output directory given (--out)");
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (seeds.empty()) throw ConfigError("at least one experiment seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("experiment seeds must be distinct");
  }
  if (settings.empty()) throw ConfigError("at least one setting is required");
  for (Setting s : settings) {
    if (s == Setting::SingleTask) throw ConfigError("SingleTask is always run and is not a transfer setting");
  }
  if (predictor_measures.empty()) throw ConfigError("at least one predictor measure is required");
  for (std::size_t n : top_n) {
    if (n == 0) throw ConfigError("Top-n baselines need n >= 1");
  }
  if (sets_from && !fs::exists(*sets_from)) throw ConfigError("selection file not found: " + sets_from->string());
  Hyper h = hyper;
  h.theta = theta;
  h.validate();
  train.validate();
  if (dims.hash_dim == 0 || dims.hidden_dim == 0) throw ConfigError("tagger dimensions must be positive");
  if (lm.order < 1) throw ConfigError("LM order must be at least 1");
  if (!(lm.discount > 0.0 && lm.discount <= 1.0)) throw ConfigError("LM discount must lie in (0, 1]");
}

void apply_config_file(const fs::path& path, RunConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  static const std::set<std::string> known{"manifest", "out",     "seed",        "seeds",   "theta",
                                           "measures", "settings", "lowercase",  "sets_from", "pooled",
                                           "predictors", "predictor_measures", "top_n", "cross_task_targets",
                                           "train",    "dims",     "lm",          "hyper"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) throw ConfigError("unknown key '" + key + "'");
    }
    if (j.contains("manifest")) config.manifest = resolve(j["manifest"].get<std::string>());
    if (j.contains("out")) config.out = resolve(j["out"].get<std::string>());
    if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("seeds")) config.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("theta")) config.theta = j["theta"].get<double>();
    if (j.contains("measures")) config.measures = parse_list<Measure>(j["measures"], parse_measure);
    if (j.contains("settings")) config.settings = parse_list<Setting>(j["settings"], parse_setting);
    if (j.contains("lowercase")) config.lowercase = j["lowercase"].get<bool>();
    if (j.contains("sets_from")) config.sets_from = resolve(j["sets_from"].get<std::string>());
    if (j.contains("pooled")) config.pooled = j["pooled"].get<bool>();
    if (j.contains("predictors")) config.predictors = parse_list<PredictorKind>(j["predictors"], parse_predictor_kind);
    if (j.contains("predictor_measures")) {
      config.predictor_measures = parse_list<Measure>(j["predictor_measures"], parse_measure);
    }
    if (j.contains("top_n")) config.top_n = j["top_n"].get<std::vector<std::size_t>>();
    if (j.contains("cross_task_targets")) {
      config.cross_task_targets = j["cross_task_targets"].get<std::vector<std::string>>();
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      config.train.learning_rate = t.value("learning_rate", config.train.learning_rate);
      config.train.max_epochs = t.value("max_epochs", config.train.max_epochs);
      config.train.patience = t.value("patience", config.train.patience);
    }
    if (j.contains("dims")) {
      config.dims.hash_dim = j["dims"].value("hash_dim", config.dims.hash_dim);
      config.dims.hidden_dim = j["dims"].value("hidden_dim", config.dims.hidden_dim);
    }
    if (j.contains("lm")) {
      config.lm.order = j["lm"].value("order", config.lm.order);
      config.lm.discount = j["lm"].value("discount", config.lm.discount);
    }
    if (j.contains("hyper")) {
      const auto& h = j["hyper"];
      config.hyper.C = h.value("C", config.hyper.C);
      config.hyper.epsilon = h.value("epsilon", config.hyper.epsilon);
      config.hyper.k = h.value("k", config.hyper.k);
      config.hyper.tolerance = h.value("tolerance", config.hyper.tolerance);
      if (h.contains("gamma")) config.hyper.gamma = h["gamma"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
}

fs::path Layout::distances(Measure m) const { return root / "distances" / (std::string(measure_name(m)) + ".csv"); }
fs::path Layout::model(const std::string& id) const { return root / "models" / (id + ".model"); }
fs::path Layout::features(const std::string& id) const { return root / "features" / (id + ".txt"); }
fs::path Layout::predictor_dir(Setting s) const { return root / "predictors" / std::string(setting_name(s)); }
fs::path Layout::predictor(Setting s, PredictorKind kind, const std::optional<std::string>& target) const {
  std::string name(predictor_kind_name(kind));
  if (target) name += "__" + *target;
  return predictor_dir(s) / (name + ".json");
}

OutputLock::OutputLock(const fs::path& directory) : path_(directory / ".srcsel.lock") {
  fs::create_directories(directory);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw ConfigError("output directory " + directory.string() + " is locked by another run (" + path_.string() +
                      "); remove the lock file if no run is active");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ignored;
  fs::remove(path_, ignored);
}

std::vector<DatasetSummary> cmd_ingest(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out);
  const Layout layout{config.out};
  std::vector<DatasetSummary> rows;
  for (const auto& d : load_datasets(config)) {
    rows.push_back({d.id, d.task, d.domain, d.label_set.size(), d.splits.train.size(), d.splits.dev.size(),
                    d.splits.test.size(), token_count(d.splits.train)});
  }
  std::ostringstream out;
  out << "id\ttask\tdomain\tlabels\ttrain\tdev\ttest\ttrain_tokens\n";
  for (const auto& r : rows) {
    out << r.id << '\t' << r.task << '\t' << r.domain << '\t' << r.labels << '\t' << r.train << '\t' << r.dev << '\t'
        << r.test << '\t' << r.train_tokens << '\n';
  }
  write_file(layout.ingest(), out.str());
  note(config, "ingested " + std::to_string(rows.size()) + " datasets -> " + layout.ingest().string());
  return rows;
}

void cmd_measure(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out);
  const Layout layout{config.out};
  const auto datasets = load_datasets(config);

  ModelContext models;
  const bool need_models = std::any_of(config.measures.begin(), config.measures.end(), is_model_based);
  if (need_models) {
    for (const auto& d : datasets) models.models.emplace(d.id, load_model(layout.model(d.id), "single-task"));
    if (std::find(config.measures.begin(), config.measures.end(), Measure::TextEmb) != config.measures.end()) {
      models.reference = load_model(layout.reference_model(), "reference encoder");
    }
  }
  MeasureContext context;
  context.text = config.text();
  context.lm = config.lm;
  context.models = need_models ? &models : nullptr;

  for (Measure m : config.measures) {
    const auto records = distance_matrix(datasets, m, context);
    std::ostringstream out;
    write_distance_csv(out, records);
    write_file(layout.distances(m), out.str());
    note(config, std::string(measure_name(m)) + ": " + std::to_string(records.size()) + " pairs -> " +
                     layout.distances(m).string());
  }
}

void cmd_observe(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out);
  const Layout layout{config.out};
  const auto datasets = load_datasets(config);
  ExperimentRunner runner = make_runner(config, datasets);

  // Models and features consumed by the model-based measures.
  const std::uint64_t model_seed = config.seeds.front();
  for (const auto& d : datasets) {
    const TaggerModel& model = runner.single_task_model(d.id, model_seed);
    std::ostringstream m;
    model.save(m);
    write_file(layout.model(d.id), m.str());
    std::ostringstream f;
    write_feature_matrix(f, extract_features(model, d));
    write_file(layout.features(d.id), f.str());
  }
  std::vector<std::string> labels{"O"};
  const TaggerModel reference =
      TaggerModel::initialize("reference", labels, derive_seed(config.seed, "reference-encoder"), config.dims);
  std::ostringstream r;
  reference.save(r);
  write_file(layout.reference_model(), r.str());
  note(config, "trained " + std::to_string(datasets.size()) + " single-task models");
  if (config.train_singles) return;

  std::vector<TransferObservation> existing;
  if (fs::exists(layout.observations())) existing = load_observations(layout);
  std::set<std::string> done;
  for (const auto& o : existing) done.insert(observation_key(o));

  std::vector<TransferObservation> fresh;
  {
    const bool new_file = !fs::exists(layout.observations());
    std::ofstream log(layout.observations(), std::ios::binary | std::ios::app);
    if (!log) throw ConfigError("cannot write " + layout.observations().string());
    if (new_file) write_observation_log(log, {});
    auto record = [&](const TransferObservation& o) {
      append_observation(log, o);
      log.flush();
      done.insert(observation_key(o));
      fresh.push_back(o);
    };

    std::vector<SkipRecord> skipped;
    if (config.sets_from) {
      std::ifstream in(*config.sets_from, std::ios::binary);
      if (!in) throw ConfigError("cannot read " + config.sets_from->string());
      const auto selections = read_selections(in);
      std::set<std::string> seen;
      for (const auto& s : selections) {
        if (s.sources.empty()) continue;
        if (std::find(config.settings.begin(), config.settings.end(), s.setting) == config.settings.end()) continue;
        if (!seen.insert(observation_key(s.setting, s.sources, s.target_id, 0)).second) continue;
        const Dataset& target = find_dataset(datasets, s.target_id);
        std::optional<std::string> reason;
        for (const auto& id : s.sources) {
          if (!reason) reason = incompatibility(s.setting, find_dataset(datasets, id), target, pair_filter(config));
        }
        if (reason) {
          skipped.push_back({s.setting, s.sources, s.target_id, *reason});
          continue;
        }
        for (std::uint64_t seed : config.seeds) {
          if (!done.count(observation_key(Setting::SingleTask, {}, s.target_id, seed))) {
            record(runner.single_task_observation(s.target_id, seed));
          }
          if (!done.count(observation_key(s.setting, s.sources, s.target_id, seed))) {
            record(runner.run_set(s.setting, s.sources, s.target_id, seed));
          }
        }
      }
      note(config, "trained " + std::to_string(fresh.size()) + " listed source combinations");
    } else {
      ExperimentPlan plan;
      plan.settings = config.settings;
      plan.seeds = config.seeds;
      plan.filter = pair_filter(config);
      runner.run_setting(plan, skipped, done, record);
      std::ostringstream out;
      write_skip_log(out, skipped);
      write_file(layout.skipped(), out.str());
      note(config, std::to_string(fresh.size()) + " new observations, " + std::to_string(skipped.size()) +
                       " incompatible pairs skipped");
    }
  }

  std::vector<TransferObservation> all = existing;
  all.insert(all.end(), fresh.begin(), fresh.end());
  sort_observations(all);
  std::ostringstream out;
  write_observation_log(out, all);
  write_file(layout.observations(), out.str());
}

void cmd_fit(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out);
  const Layout layout{config.out};
  const auto observations = load_observations(layout);
  const auto inputs = load_predictor_inputs(config, layout);
  Hyper hyper = config.hyper;
  hyper.theta = config.theta;

  for (Setting setting : config.settings) {
    const auto samples = build_samples(observations, setting, inputs, config.theta);
    fs::remove_all(layout.predictor_dir(setting));
    if (samples.empty()) {
      note(config, std::string(setting_name(setting)) + ": no observations, no predictors fitted");
      continue;
    }
    std::ostringstream table;
    table << "source\ttarget\tgain\tclass";
    for (Measure m : config.predictor_measures) table << '\t' << measure_name(m);
    table << '\n';
    for (const auto& s : samples) {
      table << s.source_id << '\t' << s.target_id << '\t' << gains_text(s.y_gain) << '\t' << gain_class_name(s.y_class);
      for (double v : s.x) table << '\t' << format_fixed(v, 6);
      table << '\n';
    }
    write_file(layout.predictor_dir(setting) / "samples.tsv", table.str());

    for (PredictorKind kind : config.predictors) {
      auto save = [&](const GainPredictor& p, const std::optional<std::string>& target) {
        std::ostringstream out;
        p.save(out);
        write_file(layout.predictor(setting, kind, target), out.str());
        if (p.is_constant()) {
          note(config, std::string(setting_name(setting)) + " " + std::string(predictor_kind_name(kind)) +
                           (target ? " (without " + *target + ")" : "") + ": single-class data, constant predictor");
        }
      };
      if (config.pooled) {
        save(fit(kind, samples, hyper), std::nullopt);
        continue;
      }
      std::map<std::string, GainPredictor> fitted;
      try {
        fitted = fit_leave_one_target_out(kind, samples, hyper);
      } catch (const ConfigError&) {
        // Some fold is unusable; fit the folds one at a time and skip the bad ones.
        std::set<std::string> targets;
        for (const auto& s : samples) targets.insert(s.target_id);
        for (const auto& t : targets) {
          try {
            fitted.emplace(t, fit(kind, without_target(samples, t), hyper));
          } catch (const ConfigError& e) {
            note(config, std::string(setting_name(setting)) + " " + std::string(predictor_kind_name(kind)) +
                             " without " + t + ": " + e.what());
          }
        }
      }
      for (const auto& [target, predictor] : fitted) save(predictor, target);
    }
    note(config, std::string(setting_name(setting)) + ": fitted predictors on " + std::to_string(samples.size()) +
                     " samples");
  }
}

void cmd_select(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out);
  const Layout layout{config.out};
  auto datasets = load_datasets(config);
  std::sort(datasets.begin(), datasets.end(), [](const Dataset& a, const Dataset& b) { return a.id < b.id; });
  const auto inputs = load_predictor_inputs(config, layout);
  const PairFilter filter = pair_filter(config);

  std::vector<Selection> selections;
  std::ostringstream report;
  for (Setting setting : config.settings) {
    report << "Predicted transfer sources (" << setting_name(setting) << ")\n";
    for (const auto& target : datasets) {
      std::set<std::string> compatible;
      for (const auto& source : datasets) {
        if (!incompatibility(setting, source, target, filter)) compatible.insert(source.id);
      }
      std::vector<std::vector<DistanceRecord>> restricted(inputs.size());
      for (std::size_t m = 0; m < inputs.size(); ++m) {
        for (const auto& r : inputs[m]) {
          if (r.target_id == target.id && compatible.count(r.source_id)) restricted[m].push_back(r);
        }
      }
      if (restricted.front().empty()) continue;

      std::vector<Selection> rows;
      for (std::size_t n : config.top_n) {
        Selection s{setting, target.id, "Top-" + std::to_string(n), topn_select(restricted.front(), n), ""};
        std::sort(s.sources.begin(), s.sources.end());
        rows.push_back(std::move(s));
      }
      rows.push_back(Selection{setting, target.id, "All", {compatible.begin(), compatible.end()}, ""});
      for (PredictorKind kind : config.predictors) {
        const auto path =
            layout.predictor(setting, kind, config.pooled ? std::nullopt : std::optional<std::string>(target.id));
        std::ifstream in(path, std::ios::binary);
        if (!in) {
          note(config, "no " + std::string(predictor_kind_name(kind)) + " predictor for " + target.id + " (" +
                           std::string(setting_name(setting)) + "); run `srcsel fit`");
          continue;
        }
        const GainPredictor predictor = GainPredictor::load(in);
        Selection s{setting, target.id, std::string(predictor_kind_name(kind)), {}, ""};
        std::vector<std::string> predicted;
        for (const auto& c : score_candidates(predictor, target.id, restricted)) {
          if (c.selected) s.sources.push_back(c.source_id);
          if (c.predicted) predicted.push_back(c.source_id + "=" + format_prediction(*c.predicted));
        }
        s.predicted = join(predicted, ",");
        rows.push_back(std::move(s));
      }

      report << "  target " << target.id << " (" << target.task << ", " << target.domain << ")\n";
      for (const auto& s : rows) {
        std::string method = s.method;
        method.resize(std::max<std::size_t>(method.size(), 8), ' ');
        report << "    " << method << "  "
               << (s.sources.empty() ? std::string("no transfer recommended") : join(s.sources, ", ")) << '\n';
      }
      selections.insert(selections.end(), rows.begin(), rows.end());
    }
    report << '\n';
  }
  std::ostringstream table;
  write_selections(table, selections);
  write_file(layout.selections(), table.str());
  write_file(layout.selection_report(), report.str());
  note(config, std::to_string(selections.size()) + " selections -> " + layout.selections().string());
}

void cmd_report(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out);
  const Layout layout{config.out};
  const auto observations = load_observations(layout);
  auto in = open_input(layout.selections(), "select");
  std::vector<Selection> selections;
  for (auto& s : read_selections(in)) {
    if (std::find(config.settings.begin(), config.settings.end(), s.setting) != config.settings.end()) {
      selections.push_back(std::move(s));
    }
  }

  const auto missing = missing_observations(selections, observations);
  if (!missing.empty()) {
    std::string listing;
    for (const auto& s : missing) {
      listing += "\n  " + std::string(setting_name(s.setting)) + " " + s.target_id + " <- {" + join(s.sources, ",") + "}";
    }
    throw DependencyError(std::to_string(missing.size()) +
                          " selected source sets have no observations; run `srcsel observe --sets-from " +
                          layout.selections().string() + "` first:" + listing);
  }

  std::ostringstream gains;
  gains << "setting\tmethod\tmean_gain\tmean_set_size\ttargets\n";
  std::ostringstream by_target;
  by_target << "setting\ttarget\tmethod\tset_size\tsources\trealized_gain\n";
  for (Setting setting : config.settings) {
    std::vector<Selection> subset;
    for (const auto& s : selections) {
      if (s.setting == setting) subset.push_back(s);
    }
    for (const auto& score : evaluate_selection(subset, observations)) {
      gains << setting_name(setting) << '\t' << score.method << '\t' << gains_text(score.mean_gain) << '\t'
            << format_fixed(score.mean_set_size, 2) << '\t' << score.targets << '\n';
    }
    for (const auto& s : subset) {
      by_target << setting_name(setting) << '\t' << s.target_id << '\t' << s.method << '\t' << s.sources.size() << '\t'
                << (s.sources.empty() ? "-" : join(s.sources, ",")) << '\t'
                << gains_text(realized_gain(s, observations)) << '\n';
    }
  }
  write_file(layout.report_dir() / "selection_gains.tsv", gains.str());
  write_file(layout.report_dir() / "selection_by_target.tsv", by_target.str());

  // Gain statistics of the single-source runs, overall and per task pair.
  std::map<std::string, std::string> task_of;
  for (const auto& e : read_manifest(config.manifest)) task_of[e.id] = e.task;
  auto task = [&](const std::string& id) {
    const auto it = task_of.find(id);
    return it == task_of.end() ? std::string("?") : it->second;
  };
  std::vector<TransferObservation> pairs;
  for (const auto& o : observations) {
    if (o.source_ids.size() == 1) pairs.push_back(o);
  }
  std::ostringstream summary;
  summary << "group\tcount\tpositive\tnegative\tmin_gain\tmean_gain\tmax_gain\tmean_rel_gain\n";
  auto emit = [&](const std::vector<GainSummary>& groups) {
    for (const auto& g : groups) {
      summary << g.group << '\t' << g.count << '\t' << g.positive << '\t' << g.negative << '\t' << gains_text(g.min_abs)
              << '\t' << gains_text(g.mean_abs) << '\t' << gains_text(g.max_abs) << '\t'
              << (g.mean_rel ? gains_text(*g.mean_rel) : "NA") << '\n';
    }
  };
  emit(aggregate(pairs, [](const TransferObservation& o) { return std::string(setting_name(o.setting)); }));
  emit(aggregate(pairs, [&](const TransferObservation& o) {
    return std::string(setting_name(o.setting)) + ":" + task(o.source_ids.front()) + "->" + task(o.target_id);
  }));
  write_file(layout.report_dir() / "gain_summary.tsv", summary.str());

  // Seed-mean gain per pair, the data behind a source-by-target heat map.
  std::map<std::tuple<Setting, std::string, std::string>, std::pair<double, std::size_t>> cells;
  for (const auto& o : pairs) {
    auto& [sum, count] = cells[{o.setting, o.source_ids.front(), o.target_id}];
    sum += o.gain_abs;
    ++count;
  }
  std::ostringstream heat;
  heat << "setting\tsource\ttarget\tmean_gain\tseeds\n";
  for (const auto& [key, agg] : cells) {
    heat << setting_name(std::get<0>(key)) << '\t' << std::get<1>(key) << '\t' << std::get<2>(key) << '\t'
         << gains_text(agg.first / static_cast<double>(agg.second)) << '\t' << agg.second << '\n';
  }
  write_file(layout.report_dir() / "pair_gains.tsv", heat.str());
  note(config, "reports -> " + layout.report_dir().string());
}

void cmd_eval_rank(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out);
  const Layout layout{config.out};
  const auto observations = load_observations(layout);

  std::ostringstream rankings;
  rankings << "measure,setting,target,rank,source,distance_value\n";
  std::ostringstream summary;
  summary << "measure,setting,avg_rho,avg_ndcg,targets\n";
  std::ostringstream table;
  table << "Ranking results (rho: rank of the best source, 1 is perfect; NDCG in [0, 1])\n";

  for (Setting setting : config.settings) {
    // Seed-mean transferred F1 per (target, source).
    std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> sums;
    for (const auto& o : observations) {
      if (o.setting != setting || o.source_ids.size() != 1) continue;
      auto& [sum, count] = sums[o.target_id][o.source_ids.front()];
      sum += o.f1_transfer;
      ++count;
    }
    if (sums.empty()) continue;
    table << '\n' << setting_name(setting) << '\n';
    for (Measure m : config.measures) {
      const auto records = load_distances(layout, m);
      double rho_sum = 0.0, ndcg_sum = 0.0;
      std::size_t targets = 0;
      for (const auto& [target, per_source] : sums) {
        std::map<std::string, double> observed;
        for (const auto& [source, agg] : per_source) observed[source] = agg.first / static_cast<double>(agg.second);
        std::vector<DistanceRecord> relevant;
        for (const auto& r : records) {
          if (r.target_id == target && observed.count(r.source_id)) relevant.push_back(r);
        }
        if (relevant.size() != observed.size()) {
          throw DependencyError(std::string(measure_name(m)) + " distances do not cover every observed source of " +
                                target + "; rerun `srcsel measure`");
        }
        const Ranking ranking = rank_sources(relevant, target);
        std::map<std::string, double> value_of;
        for (const auto& r : relevant) value_of[r.source_id] = r.value;
        for (std::size_t i = 0; i < ranking.sources.size(); ++i) {
          rankings << measure_name(m) << ',' << setting_name(setting) << ',' << target << ',' << (i + 1) << ','
                   << ranking.sources[i] << ',' << format_fixed(value_of[ranking.sources[i]], 6) << '\n';
        }
        rho_sum += static_cast<double>(best_rank_rho(ranking, observed));
        ndcg_sum += ndcg(ranking, observed);
        ++targets;
      }
      const double rho = rho_sum / static_cast<double>(targets);
      const double nd = ndcg_sum / static_cast<double>(targets);
      summary << measure_name(m) << ',' << setting_name(setting) << ',' << format_fixed(rho, 4) << ','
              << format_fixed(nd, 4) << ',' << targets << '\n';
      std::string name(measure_name(m));
      name.resize(std::max<std::size_t>(name.size(), 14), ' ');
      table << "  " << name << "  rho " << format_fixed(rho, 2) << "  NDCG " << format_fixed(nd, 4) << '\n';
    }
  }
  write_file(layout.rankings(), rankings.str());
  write_file(layout.ranking_summary(), summary.str());
  write_file(layout.ranking_table(), table.str());
  note(config, "ranking metrics -> " + layout.ranking_summary().string());
}

fs::path cmd_synth(const fs::path& directory, std::uint64_t seed) { return write_suite(directory, default_suite(seed)); }

void run_pipeline(const RunConfig& config) {
  RunConfig step = config;
  step.sets_from.reset();
  step.train_singles = false;
  cmd_ingest(step);

  RunConfig singles = step;
  singles.train_singles = true;
  cmd_observe(singles);

  cmd_measure(step);
  cmd_observe(step);
  cmd_fit(step);
  cmd_select(step);

  RunConfig combos = step;
  combos.sets_from = Layout{config.out}.selections();
  cmd_observe(combos);

  cmd_report(step);
  cmd_eval_rank(step);
}

}  // namespace srcsel::app
