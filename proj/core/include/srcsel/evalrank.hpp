#pragma once

// Tagger scoring (span micro-F1, token accuracy) and ranking quality metrics
// (best-source rank, NDCG, reciprocal rank fusion).

#include <compare>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace srcsel {

struct Span {
  std::size_t sentence = 0;
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::string type;

  auto operator<=>(const Span&) const = default;
};

using SpanSet = std::set<Span>;

/// Maximal B-X I-X ... runs become spans. An I-X that does not continue a span
/// of type X opens a new one, matching the corpus reader's BIO repair.
SpanSet decode_spans(std::span<const std::string> labels, std::size_t sentence_index = 0);
SpanSet decode_spans(const std::vector<std::vector<std::string>>& sentences);

/// BIO labels of length `length` for the spans of one sentence.
std::vector<std::string> encode_spans(const SpanSet& spans, std::size_t sentence_index, std::size_t length);

/// Precision, recall and F1 in percent.
struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Exact-match span scoring. Both sets empty scores 100/100/100; an empty
/// prediction against non-empty gold has precision 0 (and symmetrically recall 0).
PrfScore micro_f1(const SpanSet& gold, const SpanSet& predicted);

/// Percentage of positions with equal tags. Throws DimensionError on length mismatch.
double token_accuracy(std::span<const std::string> gold, std::span<const std::string> predicted);

/// Sources ordered closest first for one target under one measure.
struct Ranking {
  std::string measure;
  std::string target_id;
  std::vector<std::string> sources;
};

/// 1-based rank of the source with the highest observed value. Ties in the
/// observed values resolve to the best rank any tied source holds.
std::size_t best_rank_rho(const Ranking& ranking, const std::map<std::string, double>& observed);

/// NDCG with gain rel(i) and discount log2(i + 1). All-zero relevance scores 1.
double ndcg(const Ranking& ranking, const std::map<std::string, double>& relevance);

inline constexpr double kRrfConstant = 60.0;

/// score(s) = sum over rankings of 1 / (k + rank(s)), rank 1-based.
std::map<std::string, double> rrf_scores(std::span<const Ranking> rankings, double k = kRrfConstant);

/// Sources by descending fused score, ties broken by source id.
Ranking rrf(std::span<const Ranking> rankings, double k = kRrfConstant);

}  // namespace srcsel
