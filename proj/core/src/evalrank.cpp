#include "srcsel/evalrank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srcsel/common.hpp"

namespace srcsel {
namespace {

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

SpanSet decode_spans(std::span<const std::string> labels, std::size_t sentence_index) {
  SpanSet spans;
  bool open = false;
  Span current;
  auto close = [&] {
    if (open) spans.insert(current);
    open = false;
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string& label = labels[i];
    if (starts_with(label, "B-")) {
      close();
      current = Span{sentence_index, i, i, label.substr(2)};
      open = true;
    } else if (starts_with(label, "I-")) {
      const std::string type = label.substr(2);
      if (open && current.type == type) {
        current.end = i;
      } else {
        close();
        current = Span{sentence_index, i, i, type};
        open = true;
      }
    } else {
      close();
    }
  }
  close();
  return spans;
}

SpanSet decode_spans(const std::vector<std::vector<std::string>>& sentences) {
  SpanSet spans;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    spans.merge(decode_spans(sentences[s], s));
  }
  return spans;
}

std::vector<std::string> encode_spans(const SpanSet& spans, std::size_t sentence_index, std::size_t length) {
  std::vector<std::string> labels(length, "O");
  for (const auto& span : spans) {
    if (span.sentence != sentence_index) continue;
    if (span.end >= length || span.start > span.end) throw DimensionError("span outside sentence bounds");
    labels[span.start] = "B-" + span.type;
    for (std::size_t i = span.start + 1; i <= span.end; ++i) labels[i] = "I-" + span.type;
  }
  return labels;
}

PrfScore micro_f1(const SpanSet& gold, const SpanSet& predicted) {
  if (gold.empty() && predicted.empty()) return {100.0, 100.0, 100.0};
  std::size_t hits = 0;
  for (const auto& span : predicted) hits += gold.count(span);
  PrfScore score;
  score.precision = predicted.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(predicted.size());
  score.recall = gold.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(gold.size());
  const double denom = score.precision + score.recall;
  score.f1 = denom > 0.0 ? 2.0 * score.precision * score.recall / denom : 0.0;
  return score;
}

double token_accuracy(std::span<const std::string> gold, std::span<const std::string> predicted) {
  if (gold.size() != predicted.size()) {
    throw DimensionError("token_accuracy: " + std::to_string(gold.size()) + " gold vs " +
                         std::to_string(predicted.size()) + " predicted tags");
  }
  if (gold.empty()) return 100.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) same += gold[i] == predicted[i] ? 1 : 0;
  return 100.0 * static_cast<double>(same) / static_cast<double>(gold.size());
}

std::size_t best_rank_rho(const Ranking& ranking, const std::map<std::string, double>& observed) {
  if (ranking.sources.empty()) throw ConfigError("best_rank_rho: empty ranking");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& source : ranking.sources) {
    const auto it = observed.find(source);
    if (it == observed.end()) throw ConfigError("best_rank_rho: no observation for source '" + source + "'");
    best = std::max(best, it->second);
  }
  for (std::size_t i = 0; i < ranking.sources.size(); ++i) {
    if (observed.at(ranking.sources[i]) == best) return i + 1;
  }
  return ranking.sources.size();
}

double ndcg(const Ranking& ranking, const std::map<std::string, double>& relevance) {
  std::vector<double> gains;
  gains.reserve(ranking.sources.size());
  for (const auto& source : ranking.sources) {
    const auto it = relevance.find(source);
    if (it == relevance.end()) throw ConfigError("ndcg: no relevance for source '" + source + "'");
    if (it->second < 0.0) throw ConfigError("ndcg: negative relevance for source '" + source + "'");
    gains.push_back(it->second);
  }
  auto dcg = [](const std::vector<double>& rel) {
    double total = 0.0;
    for (std::size_t i = 0; i < rel.size(); ++i) total += rel[i] / std::log2(static_cast<double>(i) + 2.0);
    return total;
  };
  std::vector<double> ideal = gains;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double ideal_dcg = dcg(ideal);
  if (ideal_dcg == 0.0) return 1.0;
  return dcg(gains) / ideal_dcg;
}

std::map<std::string, double> rrf_scores(std::span<const Ranking> rankings, double k) {
  std::map<std::string, double> scores;
  if (rankings.empty()) return scores;
  const std::set<std::string> universe(rankings.front().sources.begin(), rankings.front().sources.end());
  for (const auto& ranking : rankings) {
    const std::set<std::string> members(ranking.sources.begin(), ranking.sources.end());
    if (members != universe || members.size() != ranking.sources.size()) {
      throw ConfigError("rrf: rankings cover different source sets");
    }
    for (std::size_t i = 0; i < ranking.sources.size(); ++i) {
      scores[ranking.sources[i]] += 1.0 / (k + static_cast<double>(i + 1));
    }
  }
  return scores;
}

Ranking rrf(std::span<const Ranking> rankings, double k) {
  const auto scores = rrf_scores(rankings, k);
  Ranking fused;
  if (!rankings.empty()) {
    fused.measure = rankings.front().measure;
    fused.target_id = rankings.front().target_id;
  }
  for (const auto& [source, score] : scores) fused.sources.push_back(source);
  std::stable_sort(fused.sources.begin(), fused.sources.end(),
                   [&](const std::string& a, const std::string& b) { return scores.at(a) > scores.at(b); });
  return fused;
}

}  // namespace srcsel
