#include "srcsel/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "srcsel/common.hpp"

namespace srcsel {
namespace {

constexpr std::size_t kContextWords = 300;
constexpr std::array<const char*, 4> kPosTags{"NOUN", "VERB", "ADJ", "DET"};
constexpr std::array<const char*, 10> kSyllables{"ka", "lo", "mi", "ren", "to", "sa", "vi", "dor", "ne", "lu"};
constexpr std::array<const char*, 19> kDateWords{"january", "february", "march",   "april",    "may",
                                                 "june",    "july",     "august",  "september", "october",
                                                 "november", "december", "monday", "tuesday",  "wednesday",
                                                 "thursday", "friday",   "saturday", "sunday"};

struct Lexicon {
  std::vector<std::string> words;
  std::vector<double> angles;
};

Lexicon spread(std::vector<std::string> words) {
  Lexicon lex;
  const double n = static_cast<double>(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    lex.angles.push_back(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  }
  lex.words = std::move(words);
  return lex;
}

const Lexicon& context_lexicon() {
  static const Lexicon lex = [] {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < kContextWords; ++i) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "w%03zu", i);
      words.emplace_back(buf);
    }
    return spread(std::move(words));
  }();
  return lex;
}

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

Lexicon name_lexicon(const std::string& suffix) {
  std::vector<std::string> words;
  for (const char* a : kSyllables) {
    for (const char* b : kSyllables) words.push_back(capitalized(std::string(a) + b + suffix));
  }
  return spread(std::move(words));
}

Lexicon time_lexicon() {
  std::vector<std::string> words;
  for (int h = 0; h < 24; ++h) {
    for (int m = 0; m < 60; m += 15) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "%02d:%02d", h, m);
      words.emplace_back(buf);
    }
  }
  return spread(std::move(words));
}

struct EntityType {
  std::string label;
  std::string cue;
  Lexicon names;
};

std::vector<EntityType> entity_types(const std::string& task) {
  if (task == "NER") {
    return {{"PER", "mr", name_lexicon("")}, {"LOC", "in", name_lexicon("ia")}, {"ORG", "at", name_lexicon("co")}};
  }
  if (task == "TIME") {
    std::vector<std::string> dates(kDateWords.begin(), kDateWords.end());
    return {{"DATE", "on", spread(std::move(dates))}, {"TIME", "by", time_lexicon()}};
  }
  throw ConfigError("synthesize: unknown task '" + task + "' (expected NER, TIME or POS)");
}

/// Samples lexicon entries with weight exp(concentration * cos(angle - center)).
class DomainSampler {
 public:
  DomainSampler(const Lexicon& lex, double center, double concentration) : lex_(lex) {
    double total = 0.0;
    for (double a : lex.angles) {
      total += std::exp(concentration * std::cos(a - center));
      cumulative_.push_back(total);
    }
  }

  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

  const std::string& word(std::size_t i) const { return lex_.words[i]; }

 private:
  const Lexicon& lex_;
  std::vector<double> cumulative_;
};

void add_mention(Sentence& s, const EntityType& type, const DomainSampler& names, std::size_t length, Rng& rng) {
  s.tokens.push_back({type.cue, "O"});
  for (std::size_t k = 0; k < length; ++k) {
    s.tokens.push_back({names.word(names.draw(rng)), (k == 0 ? "B-" : "I-") + type.label});
  }
}

std::vector<Sentence> span_split(const SynthSpec& spec, std::size_t count, Rng& rng) {
  const auto types = entity_types(spec.task);
  const DomainSampler context(context_lexicon(), spec.angle, spec.concentration);
  std::vector<DomainSampler> names;
  for (const auto& t : types) names.emplace_back(t.names, spec.angle, spec.concentration);

  std::vector<Sentence> out;
  // The first sentence carries a two-token mention of every type.
  Sentence coverage;
  for (std::size_t t = 0; t < types.size(); ++t) {
    coverage.tokens.push_back({context.word(context.draw(rng)), "O"});
    add_mention(coverage, types[t], names[t], 2, rng);
  }
  out.push_back(std::move(coverage));

  while (out.size() < count) {
    Sentence s;
    const std::size_t context_words = 3 + rng.below(5);
    const std::size_t mentions = 1 + rng.below(2);
    std::vector<std::size_t> slots;
    for (std::size_t m = 0; m < mentions; ++m) slots.push_back(rng.below(context_words + 1));
    std::sort(slots.begin(), slots.end());
    std::size_t next_slot = 0;
    for (std::size_t w = 0; w <= context_words; ++w) {
      while (next_slot < slots.size() && slots[next_slot] == w) {
        const std::size_t t = rng.below(types.size());
        add_mention(s, types[t], names[t], 1 + rng.below(2), rng);
        ++next_slot;
      }
      if (w < context_words) s.tokens.push_back({context.word(context.draw(rng)), "O"});
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> pos_split(const SynthSpec& spec, std::size_t count, Rng& rng) {
  const DomainSampler context(context_lexicon(), spec.angle, spec.concentration);
  auto token = [&](std::size_t i) { return Token{context.word(i), kPosTags[i % kPosTags.size()]}; };

  std::vector<Sentence> out;
  Sentence coverage;
  std::array<bool, kPosTags.size()> seen{};
  while (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    const std::size_t i = context.draw(rng);
    if (!seen[i % kPosTags.size()]) {
      seen[i % kPosTags.size()] = true;
      coverage.tokens.push_back(token(i));
    }
  }
  out.push_back(std::move(coverage));
  while (out.size() < count) {
    Sentence s;
    const std::size_t length = 5 + rng.below(6);
    for (std::size_t k = 0; k < length; ++k) s.tokens.push_back(token(context.draw(rng)));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Dataset synthesize(const SynthSpec& spec) {
  if (spec.id.empty()) throw ConfigError("synthesize: empty dataset id");
  if (spec.train == 0 || spec.dev == 0 || spec.test == 0) {
    throw ConfigError("synthesize '" + spec.id + "': every split needs at least one sentence");
  }
  if (!(spec.concentration >= 0.0)) throw ConfigError("synthesize '" + spec.id + "': negative concentration");
  auto make = [&](std::size_t count, std::string_view split) {
    Rng rng(derive_seed(spec.seed, spec.id + "/" + std::string(split)));
    return spec.task == "POS" ? pos_split(spec, count, rng) : span_split(spec, count, rng);
  };
  Splits splits;
  splits.train = make(spec.train, "train");
  splits.dev = make(spec.dev, "dev");
  splits.test = make(spec.test, "test");
  return make_dataset(spec.id, spec.task, spec.domain.empty() ? spec.id : spec.domain, std::move(splits));
}

std::vector<SynthSpec> default_suite(std::uint64_t seed) {
  auto spec = [seed](std::string id, std::string task, std::string domain, double angle, std::size_t train) {
    SynthSpec s;
    s.id = std::move(id);
    s.task = std::move(task);
    s.domain = std::move(domain);
    s.angle = angle;
    s.train = train;
    s.seed = seed;
    return s;
  };
  return {
      spec("ner_news", "NER", "news", 0.0, 80),      spec("ner_web", "NER", "web", 0.7, 60),
      spec("ner_social", "NER", "social", 1.4, 50),  spec("ner_bio", "NER", "bio", 2.6, 70),
      spec("ner_legal", "NER", "legal", 4.0, 40),    spec("time_news", "TIME", "news", 0.2, 60),
      spec("time_clinical", "TIME", "clinical", 3.0, 50), spec("pos_news", "POS", "news", 0.1, 60),
      spec("pos_web", "POS", "web", 0.8, 40),
  };
}

std::filesystem::path write_suite(const std::filesystem::path& directory, const std::vector<SynthSpec>& specs) {
  std::filesystem::create_directories(directory);
  const auto manifest_path = directory / "manifest.tsv";
  std::ofstream manifest(manifest_path, std::ios::binary);
  if (!manifest) throw ConfigError("cannot write " + manifest_path.string());
  manifest << "# id\ttask\tdomain\ttrain\tdev\ttest\n";
  for (const auto& spec : specs) {
    const Dataset d = synthesize(spec);
    for (SplitName split : {SplitName::Train, SplitName::Dev, SplitName::Test}) {
      const auto path = directory / (spec.id + "." + std::string(split_name(split)) + ".conll");
      std::ofstream out(path, std::ios::binary);
      if (!out) throw ConfigError("cannot write " + path.string());
      out << serialize_conll(d.split(split));
    }
    manifest << d.id << '\t' << d.task << '\t' << d.domain << '\t' << d.id << ".train.conll\t" << d.id
             << ".dev.conll\t" << d.id << ".test.conll\n";
  }
  return manifest_path;
}

}  // namespace srcsel
