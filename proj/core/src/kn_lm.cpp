#include "srcsel/kn_lm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "srcsel/common.hpp"

namespace srcsel {

std::size_t NGramLM::KeyHash::operator()(const std::vector<WordId>& key) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (WordId id : key) {
    h ^= id;
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

NGramLM NGramLM::train(std::span<const Sentence> sentences, const LmOptions& options) {
  if (options.order < 1) throw ConfigError("LM order must be >= 1");
  if (!(options.discount > 0.0 && options.discount <= 1.0)) throw ConfigError("KN discount must lie in (0, 1]");
  if (token_count(sentences) == 0) throw ConfigError("cannot train an LM on an empty corpus");

  NGramLM lm;
  lm.options_ = options;
  lm.words_ = {"<s>", "</s>", "<unk>"};
  // sorted vocabulary keeps ids independent of sentence order
  std::set<std::string> vocab;
  for (const auto& sentence : sentences) {
    for (const auto& token : sentence.tokens) vocab.insert(normalize_term(token.text, options.text));
  }
  vocab.erase("<s>");
  vocab.erase("</s>");
  vocab.erase("<unk>");
  for (const auto& word : vocab) lm.words_.push_back(word);
  for (WordId i = 0; i < lm.words_.size(); ++i) lm.ids_.emplace(lm.words_[i], i);

  const auto n = static_cast<std::size_t>(options.order);
  // raw k-gram counts for every order, over k-grams ending at predicted positions
  std::vector<std::unordered_map<std::vector<WordId>, double, KeyHash>> raw(n);
  for (const auto& sentence : sentences) {
    const auto padded = lm.encode(sentence);
    for (std::size_t i = n - 1; i < padded.size(); ++i) {
      for (std::size_t k = 1; k <= n; ++k) {
        std::vector<WordId> key(padded.begin() + static_cast<long>(i + 1 - k), padded.begin() + static_cast<long>(i + 1));
        raw[k - 1][key] += 1.0;
      }
    }
  }

  lm.tables_.resize(n);
  lm.tables_[n - 1].counts = std::move(raw[n - 1]);
  for (std::size_t k = n - 1; k >= 1; --k) {
    // continuation count of a k-gram: distinct words seen to its left
    auto& table = lm.tables_[k - 1];
    for (const auto& [key, count] : raw[k]) {
      std::vector<WordId> suffix(key.begin() + 1, key.end());
      table.counts[suffix] += 1.0;
    }
  }
  for (auto& table : lm.tables_) {
    for (const auto& [key, count] : table.counts) {
      std::vector<WordId> context(key.begin(), key.end() - 1);
      auto& stats = table.contexts[context];
      stats.total += count;
      stats.distinct += 1.0;
    }
  }
  return lm;
}

std::vector<NGramLM::WordId> NGramLM::encode(const Sentence& sentence) const {
  std::vector<WordId> padded(static_cast<std::size_t>(options_.order - 1), kBos);
  for (const auto& token : sentence.tokens) padded.push_back(id_of(normalize_term(token.text, options_.text)));
  padded.push_back(kEos);
  return padded;
}

std::vector<std::string> NGramLM::predictable_vocabulary() const {
  return std::vector<std::string>(words_.begin() + 1, words_.end());
}

NGramLM::WordId NGramLM::id_of(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

double NGramLM::prob(std::span<const std::string> context, std::string_view word) const {
  std::vector<WordId> ids;
  ids.reserve(context.size());
  for (const auto& w : context) ids.push_back(id_of(w));
  return prob_ids(ids, id_of(word));
}

double NGramLM::prob_ids(std::span<const WordId> context, WordId word) const {
  const std::size_t n = static_cast<std::size_t>(options_.order);
  std::vector<WordId> ctx(context.begin(), context.end());
  if (ctx.size() > n - 1) ctx.erase(ctx.begin(), ctx.end() - static_cast<long>(n - 1));
  // histories shorter than n-1 are padded with begin symbols, as at sentence start
  while (ctx.size() < n - 1) ctx.insert(ctx.begin(), kBos);
  return prob_at(n, ctx, word);
}

double NGramLM::prob_at(std::size_t level, std::span<const WordId> context, WordId word) const {
  if (level == 0) return 1.0 / static_cast<double>(predictable_size());
  const double lower = prob_at(level - 1, context.subspan(1), word);
  const auto& table = tables_[level - 1];
  std::vector<WordId> key(context.begin(), context.end());
  const auto stats = table.contexts.find(key);
  if (stats == table.contexts.end() || stats->second.total <= 0.0) return lower;
  key.push_back(word);
  const auto hit = table.counts.find(key);
  const double count = hit == table.counts.end() ? 0.0 : hit->second;
  const double d = options_.discount;
  return std::max(count - d, 0.0) / stats->second.total + d * stats->second.distinct / stats->second.total * lower;
}

double NGramLM::perplexity(std::span<const Sentence> sentences) const {
  if (token_count(sentences) == 0) throw ConfigError("perplexity of an empty text is undefined");
  const std::size_t n = static_cast<std::size_t>(options_.order);
  double log_sum = 0.0;
  std::size_t scored = 0;
  for (const auto& sentence : sentences) {
    const auto padded = encode(sentence);
    for (std::size_t i = n - 1; i < padded.size(); ++i) {
      const std::span<const WordId> context(padded.data() + (i + 1 - n), n - 1);
      log_sum += std::log(prob_at(n, context, padded[i]));
      ++scored;
    }
  }
  return std::exp(-log_sum / static_cast<double>(scored));
}

NGramLM train_kn_lm(const Dataset& source, const LmOptions& options) {
  if (token_count(source.splits.train) == 0) {
    throw ConfigError("LM for '" + source.id + "': empty train split");
  }
  return NGramLM::train(source.splits.train, options);
}

double perplexity(const NGramLM& lm, const Dataset& target, SplitName split) {
  const auto& sentences = target.split(split);
  if (token_count(sentences) == 0) {
    throw ConfigError("perplexity on '" + target.id + "': empty " + std::string(split_name(split)) + " split");
  }
  return lm.perplexity(sentences);
}

}  // namespace srcsel
