#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "srcsel/corpus.hpp"

namespace srcsel {

struct LmOptions {
  int order = 5;
  /// Absolute discount used at every order; must lie in (0, 1].
  double discount = 0.75;
  TextOptions text;
};

/// Interpolated Kneser-Ney n-gram model.
///
/// Each training sentence is padded with order-1 begin symbols and one end
/// symbol. The highest order uses raw counts, lower orders use continuation
/// counts (number of distinct left extensions), and the unigram level
/// interpolates with a uniform distribution over the predictable vocabulary:
/// the training words, the end symbol and <unk>. <unk> has no counts of its
/// own and receives only smoothed mass.
class NGramLM {
 public:
  using WordId = std::uint32_t;

  static constexpr WordId kBos = 0;
  static constexpr WordId kEos = 1;
  static constexpr WordId kUnk = 2;

  static NGramLM train(std::span<const Sentence> sentences, const LmOptions& options = {});

  int order() const noexcept { return options_.order; }
  double discount() const noexcept { return options_.discount; }

  /// Words the model can predict (training words, "</s>", "<unk>").
  std::vector<std::string> predictable_vocabulary() const;
  std::size_t predictable_size() const noexcept { return words_.size() - 1; }

  WordId id_of(std::string_view word) const;

  /// P(word | context). `context` lists preceding words oldest first; only the
  /// last order-1 entries are used. "<s>" and "</s>" are recognized; unknown
  /// words map to <unk>.
  double prob(std::span<const std::string> context, std::string_view word) const;
  double prob_ids(std::span<const WordId> context, WordId word) const;

  /// exp of the mean negative log-probability per scored symbol. Every word and
  /// the end symbol of each sentence is scored and counted. Throws ConfigError
  /// if `sentences` contains no tokens.
  double perplexity(std::span<const Sentence> sentences) const;

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<WordId>& key) const noexcept;
  };
  struct ContextStats {
    double total = 0.0;      // sum of (continuation) counts following the context
    double distinct = 0.0;   // number of distinct words following the context
  };
  struct OrderTable {
    std::unordered_map<std::vector<WordId>, double, KeyHash> counts;
    std::unordered_map<std::vector<WordId>, ContextStats, KeyHash> contexts;
  };

  double prob_at(std::size_t level, std::span<const WordId> context, WordId word) const;
  std::vector<WordId> encode(const Sentence& sentence) const;

  LmOptions options_;
  std::vector<std::string> words_;  // id -> string
  std::unordered_map<std::string, WordId> ids_;
  std::vector<OrderTable> tables_;  // tables_[k - 1] holds k-grams
};

/// LM over the source's train split.
NGramLM train_kn_lm(const Dataset& source, const LmOptions& options = {});

/// Perplexity of `lm` on one split of `target` (train by default).
double perplexity(const NGramLM& lm, const Dataset& target, SplitName split = SplitName::Train);

}  // namespace srcsel
