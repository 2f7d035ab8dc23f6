#include "srcsel/transfer.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>

#include "srcsel/common.hpp"

namespace srcsel {
namespace {

constexpr int kLogDecimals = 4;

std::string format_sources(const std::vector<std::string>& ids) { return ids.empty() ? "-" : join(ids, ","); }

std::string format_rel(const std::optional<double>& rel) {
  return rel ? format_fixed(*rel, kLogDecimals) : "NA";
}

}  // namespace

std::string_view setting_name(Setting setting) {
  switch (setting) {
    case Setting::SingleTask: return "SingleTask";
    case Setting::ZeroShot: return "ZeroShot";
    case Setting::DomainAdapt: return "DomainAdapt";
    case Setting::CrossTask: return "CrossTask";
  }
  return "SingleTask";
}

Setting parse_setting(std::string_view name) {
  for (Setting s : {Setting::SingleTask, Setting::ZeroShot, Setting::DomainAdapt, Setting::CrossTask}) {
    if (setting_name(s) == name) return s;
  }
  throw ConfigError("unknown setting '" + std::string(name) + "'");
}

Gain gain(double f1_single, double f1_transfer) {
  Gain g;
  g.absolute = f1_transfer - f1_single;
  if (f1_single > 0.0) g.relative = 100.0 * g.absolute / f1_single;
  return g;
}

TransferObservation make_observation(Setting setting, std::vector<std::string> source_ids, std::string target_id,
                                     std::uint64_t seed, double f1_single, double f1_transfer) {
  std::sort(source_ids.begin(), source_ids.end());
  TransferObservation o;
  o.setting = setting;
  o.source_ids = std::move(source_ids);
  o.target_id = std::move(target_id);
  o.seed = seed;
  o.f1_single = round_decimals(f1_single, kLogDecimals);
  o.f1_transfer = round_decimals(f1_transfer, kLogDecimals);
  const Gain g = gain(o.f1_single, o.f1_transfer);
  o.gain_abs = g.absolute;
  o.gain_rel = g.relative;
  return o;
}

bool gains_consistent(const TransferObservation& observation) {
  const Gain g = gain(observation.f1_single, observation.f1_transfer);
  return format_fixed(g.absolute, kLogDecimals) == format_fixed(observation.gain_abs, kLogDecimals) &&
         format_rel(g.relative) == format_rel(observation.gain_rel);
}

std::string observation_key(Setting setting, std::vector<std::string> source_ids, const std::string& target_id,
                            std::uint64_t seed) {
  std::sort(source_ids.begin(), source_ids.end());
  return std::string(setting_name(setting)) + "|" + format_sources(source_ids) + "|" + target_id + "|" +
         std::to_string(seed);
}

std::string observation_key(const TransferObservation& o) {
  return observation_key(o.setting, o.source_ids, o.target_id, o.seed);
}

void append_observation(std::ostream& out, const TransferObservation& o) {
  out << setting_name(o.setting) << '\t' << format_sources(o.source_ids) << '\t' << o.target_id << '\t' << o.seed
      << '\t' << format_fixed(o.f1_single, kLogDecimals) << '\t' << format_fixed(o.f1_transfer, kLogDecimals) << '\t'
      << format_fixed(o.gain_abs, kLogDecimals) << '\t' << format_rel(o.gain_rel) << '\n';
}

void write_observation_log(std::ostream& out, std::span<const TransferObservation> observations) {
  out << "setting\tsources\ttarget\tseed\tf1_single\tf1_transfer\tgain_abs\tgain_rel\n";
  for (const auto& o : observations) append_observation(out, o);
}

std::vector<TransferObservation> read_observation_log(std::istream& in) {
  std::vector<TransferObservation> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty() || line.rfind("setting\t", 0) == 0) continue;
    const auto fields = split_fields(trim(line), '\t');
    if (fields.size() != 8) throw ParseError("observation log: expected 8 fields", line_number);
    try {
      TransferObservation o;
      o.setting = parse_setting(fields[0]);
      if (fields[1] != "-") o.source_ids = split_fields(fields[1], ',');
      o.target_id = fields[2];
      o.seed = static_cast<std::uint64_t>(parse_int(fields[3]));
      o.f1_single = parse_double(fields[4]);
      o.f1_transfer = parse_double(fields[5]);
      o.gain_abs = parse_double(fields[6]);
      if (fields[7] != "NA") o.gain_rel = parse_double(fields[7]);
      out.push_back(std::move(o));
    } catch (const Error& e) {
      throw ParseError(std::string("observation log: ") + e.what(), line_number);
    }
  }
  return out;
}

void sort_observations(std::vector<TransferObservation>& observations) {
  std::stable_sort(observations.begin(), observations.end(),
                   [](const TransferObservation& a, const TransferObservation& b) {
                     const std::string sa = format_sources(a.source_ids);
                     const std::string sb = format_sources(b.source_ids);
                     return std::tie(a.setting, sa, a.target_id, a.seed) < std::tie(b.setting, sb, b.target_id, b.seed);
                   });
}

std::optional<std::string> incompatibility(Setting setting, const Dataset& source, const Dataset& target,
                                           const PairFilter& filter) {
  if (source.id == target.id) return "self transfer";
  switch (setting) {
    case Setting::SingleTask:
      return "single-task runs have no source";
    case Setting::ZeroShot:
    case Setting::DomainAdapt:
      if (source.label_set != target.label_set) {
        return "label sets differ (" + source.task + " vs " + target.task + ")";
      }
      return std::nullopt;
    case Setting::CrossTask:
      if (source.label_set == target.label_set) return "same label set; not a cross-task pair";
      if (!filter.cross_task_targets.empty() && !filter.cross_task_targets.count(target.task)) {
        return "target task " + target.task + " excluded by cross-task filter";
      }
      return std::nullopt;
  }
  return std::nullopt;
}

void write_skip_log(std::ostream& out, std::span<const SkipRecord> skipped) {
  out << "setting\tsources\ttarget\treason\n";
  for (const auto& s : skipped) {
    out << setting_name(s.setting) << '\t' << format_sources(s.source_ids) << '\t' << s.target_id << '\t' << s.reason
        << '\n';
  }
}

ExperimentRunner::ExperimentRunner(std::span<const Dataset> datasets, TrainConfig config, TaggerDims dims)
    : config_(config), dims_(dims) {
  config_.validate();
  for (const auto& d : datasets) datasets_.emplace(d.id, &d);
}

const Dataset& ExperimentRunner::dataset(const std::string& id) const {
  const auto it = datasets_.find(id);
  if (it == datasets_.end()) throw ConfigError("unknown dataset '" + id + "'");
  return *it->second;
}

TrainConfig ExperimentRunner::config_for(std::uint64_t seed) const {
  // The configured seed is the run's top-level seed; each experiment seed
  // draws from its own derived stream.
  TrainConfig c = config_;
  c.seed = derive_seed(config_.seed, "experiment-seed/" + std::to_string(seed));
  return c;
}

const TaggerModel& ExperimentRunner::single_task_model(const std::string& dataset_id, std::uint64_t seed) {
  const auto key = std::make_pair(dataset_id, seed);
  auto it = models_.find(key);
  if (it == models_.end()) it = models_.emplace(key, train(dataset(dataset_id), config_for(seed), dims_)).first;
  return it->second;
}

double ExperimentRunner::run_single_task(const std::string& target_id, std::uint64_t seed) {
  return evaluate(single_task_model(target_id, seed), dataset(target_id).splits.test).f1;
}

TransferObservation ExperimentRunner::single_task_observation(const std::string& target_id, std::uint64_t seed) {
  const double f1 = run_single_task(target_id, seed);
  return make_observation(Setting::SingleTask, {}, target_id, seed, f1, f1);
}

double ExperimentRunner::transfer_score(Setting setting, const TaggerModel& source_model, const Dataset& target,
                                        std::uint64_t seed) const {
  switch (setting) {
    case Setting::ZeroShot:
      return zero_shot_apply(source_model, target).f1;
    case Setting::DomainAdapt:
      return evaluate(fine_tune(source_model, target, config_for(seed)), target.splits.test).f1;
    case Setting::CrossTask: {
      const TaggerModel swapped = swap_head(source_model, tagger_labels(target), derive_seed(seed, "cross-task-head"));
      return evaluate(fine_tune(swapped, target, config_for(seed)), target.splits.test).f1;
    }
    case Setting::SingleTask:
      break;
  }
  throw ConfigError("transfer_score: single-task is not a transfer setting");
}

TransferObservation ExperimentRunner::run_pair(Setting setting, const std::string& source_id,
                                               const std::string& target_id, std::uint64_t seed) {
  const Dataset& source = dataset(source_id);
  const Dataset& target = dataset(target_id);
  if (auto reason = incompatibility(setting, source, target)) {
    throw ConfigError(std::string(setting_name(setting)) + " " + source_id + " -> " + target_id + ": " + *reason);
  }
  const double single = run_single_task(target_id, seed);
  const double transferred = transfer_score(setting, single_task_model(source_id, seed), target, seed);
  return make_observation(setting, {source_id}, target_id, seed, single, transferred);
}

TransferObservation ExperimentRunner::run_set(Setting setting, std::vector<std::string> source_ids,
                                              const std::string& target_id, std::uint64_t seed) {
  std::sort(source_ids.begin(), source_ids.end());
  const double single = run_single_task(target_id, seed);
  if (source_ids.empty()) return make_observation(setting, {}, target_id, seed, single, single);
  if (source_ids.size() == 1) return run_pair(setting, source_ids.front(), target_id, seed);

  const Dataset& target = dataset(target_id);
  std::vector<const Dataset*> sources;
  for (const auto& id : source_ids) {
    const Dataset& source = dataset(id);
    if (auto reason = incompatibility(setting, source, target)) {
      throw ConfigError(std::string(setting_name(setting)) + " " + id + " -> " + target_id + ": " + *reason);
    }
    sources.push_back(&source);
  }
  // Cross-task sources may come from different tasks; their head is replaced anyway.
  const auto combined = train_multi(sources, config_for(seed), dims_, setting == Setting::CrossTask);
  const double transferred = transfer_score(setting, *combined, target, seed);
  return make_observation(setting, source_ids, target_id, seed, single, transferred);
}

std::vector<TransferObservation> ExperimentRunner::run_setting(
    const ExperimentPlan& plan, std::vector<SkipRecord>& skipped, const std::set<std::string>& done,
    const std::function<void(const TransferObservation&)>& on_result) {
  std::vector<TransferObservation> out;
  auto emit = [&](TransferObservation o) {
    if (on_result) on_result(o);
    out.push_back(std::move(o));
  };
  for (std::uint64_t seed : plan.seeds) {
    for (const auto& [target_id, target] : datasets_) {
      if (!done.count(observation_key(Setting::SingleTask, {}, target_id, seed))) {
        emit(single_task_observation(target_id, seed));
      }
    }
  }
  for (Setting setting : plan.settings) {
    for (const auto& [source_id, source] : datasets_) {
      for (const auto& [target_id, target] : datasets_) {
        if (source_id == target_id) continue;
        if (auto reason = incompatibility(setting, *source, *target, plan.filter)) {
          skipped.push_back({setting, {source_id}, target_id, *reason});
          continue;
        }
        for (std::uint64_t seed : plan.seeds) {
          if (done.count(observation_key(setting, {source_id}, target_id, seed))) continue;
          emit(run_pair(setting, source_id, target_id, seed));
        }
      }
    }
  }
  return out;
}

std::vector<GainSummary> aggregate(std::span<const TransferObservation> observations,
                                   const std::function<std::string(const TransferObservation&)>& key) {
  std::map<std::string, std::vector<const TransferObservation*>> groups;
  for (const auto& o : observations) groups[key(o)].push_back(&o);
  std::vector<GainSummary> out;
  for (const auto& [name, members] : groups) {
    GainSummary s;
    s.group = name;
    s.count = members.size();
    s.min_abs = std::numeric_limits<double>::infinity();
    s.max_abs = -std::numeric_limits<double>::infinity();
    double sum_abs = 0.0, sum_rel = 0.0;
    std::size_t rel_count = 0;
    for (const auto* o : members) {
      s.min_abs = std::min(s.min_abs, o->gain_abs);
      s.max_abs = std::max(s.max_abs, o->gain_abs);
      sum_abs += o->gain_abs;
      if (o->gain_abs > 0.0) ++s.positive;
      if (o->gain_abs < 0.0) ++s.negative;
      if (o->gain_rel) {
        s.min_rel = s.min_rel ? std::min(*s.min_rel, *o->gain_rel) : *o->gain_rel;
        s.max_rel = s.max_rel ? std::max(*s.max_rel, *o->gain_rel) : *o->gain_rel;
        sum_rel += *o->gain_rel;
        ++rel_count;
      }
    }
    s.mean_abs = sum_abs / static_cast<double>(s.count);
    if (rel_count > 0) s.mean_rel = sum_rel / static_cast<double>(rel_count);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace srcsel
