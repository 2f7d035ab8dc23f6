#include "srcsel/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "srcsel/common.hpp"

namespace srcsel {
namespace {

bool valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= text.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000)) return false;
    if (cp >= 0xD800 && cp <= 0xDFFF) return false;
    if (cp > 0x10FFFF) return false;
    i += extra + 1;
  }
  return true;
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n')) + 1;
}

std::size_t first_invalid_utf8(std::string_view text) {
  // Linear rescan to report a line number; only used on the error path.
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t end = text.find('\n', line_start);
    if (end == std::string_view::npos) end = text.size();
    if (!valid_utf8(text.substr(line_start, end - line_start))) return line_start;
    line_start = end + 1;
  }
  return 0;
}

// Orphan I-X (not preceded by B-X or I-X) becomes B-X, or is rejected in strict mode.
void repair_bio(Sentence& sentence, bool strict, std::size_t first_line) {
  std::string previous(kOutsideLabel);
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    std::string& label = sentence.tokens[i].label;
    if (label.size() > 2 && label.compare(0, 2, "I-") == 0) {
      const std::string type = label.substr(2);
      const bool continues = previous == "B-" + type || previous == "I-" + type;
      if (!continues) {
        if (strict) throw ParseError("orphan tag " + label + " (no preceding B-" + type + ")", first_line + i);
        label = "B-" + type;
      }
    }
    previous = label;
  }
}

std::vector<Sentence> read_split(const std::filesystem::path& path, const ParseOptions& options,
                                 const std::string& dataset_id) {
  try {
    return parse_conll(read_text_file(path), options);
  } catch (const Error& e) {
    throw ConfigError("dataset '" + dataset_id + "': " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view split_name(SplitName split) {
  switch (split) {
    case SplitName::Train: return "train";
    case SplitName::Dev: return "dev";
    case SplitName::Test: return "test";
  }
  return "train";
}

const std::vector<Sentence>& Dataset::split(SplitName which) const {
  switch (which) {
    case SplitName::Train: return splits.train;
    case SplitName::Dev: return splits.dev;
    case SplitName::Test: return splits.test;
  }
  return splits.train;
}

Dataset make_dataset(std::string id, std::string task, std::string domain, Splits splits) {
  if (splits.train.empty() || splits.dev.empty() || splits.test.empty()) {
    throw ConfigError("dataset '" + id + "' has an empty split (train " + std::to_string(splits.train.size()) +
                      ", dev " + std::to_string(splits.dev.size()) + ", test " +
                      std::to_string(splits.test.size()) + ")");
  }
  Dataset dataset{std::move(id), std::move(task), std::move(domain), {}, std::move(splits)};
  for (const auto* part : {&dataset.splits.train, &dataset.splits.dev, &dataset.splits.test}) {
    for (const auto& sentence : *part) {
      for (const auto& token : sentence.tokens) {
        if (token.label != kOutsideLabel) dataset.label_set.insert(token.label);
      }
    }
  }
  return dataset;
}

bool is_span_labeling(const std::set<std::string>& labels) {
  return std::any_of(labels.begin(), labels.end(), [](const std::string& l) {
    return l.size() > 2 && (l.compare(0, 2, "B-") == 0 || l.compare(0, 2, "I-") == 0);
  });
}

bool is_span_task(const Dataset& dataset) {
  // A corpus with only O tags has nothing but spans-to-find, so it counts as span-labeled.
  return dataset.label_set.empty() || is_span_labeling(dataset.label_set);
}

std::vector<Sentence> parse_conll(std::string_view raw, const ParseOptions& options) {
  if (!valid_utf8(raw)) {
    throw ParseError("invalid UTF-8", line_of_offset(raw, first_invalid_utf8(raw)));
  }
  std::vector<Sentence> sentences;
  Sentence current;
  std::size_t current_first_line = 0;
  std::size_t line_number = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) {
      repair_bio(current, options.strict_bio, current_first_line);
      sentences.push_back(std::move(current));
      current = Sentence{};
    }
  };

  std::size_t pos = 0;
  while (pos < raw.size()) {
    std::size_t end = raw.find('\n', pos);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view line = raw.substr(pos, end - pos);
    pos = end + 1;
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (trim(line).empty()) {
      flush();
      continue;
    }
    if (trim(line).starts_with("-DOCSTART-")) continue;

    std::string text;
    std::string label;
    if (line.find('\t') != std::string_view::npos) {
      const auto fields = split_fields(line, '\t');
      if (fields.size() < 2) throw ParseError("missing label column", line_number);
      text = std::string(trim(fields.front()));
      label = std::string(trim(fields.back()));
    } else {
      const auto fields = split_whitespace(line);
      if (fields.size() < 2) throw ParseError("missing label column", line_number);
      text = fields.front();
      label = fields.back();
    }
    if (text.empty()) throw ParseError("empty token text", line_number);
    if (label.empty()) throw ParseError("missing label column", line_number);
    if (current.tokens.empty()) current_first_line = line_number;
    current.tokens.push_back(Token{std::move(text), std::move(label)});
  }
  flush();
  return sentences;
}

std::string serialize_conll(std::span<const Sentence> sentences) {
  std::string out;
  for (const auto& sentence : sentences) {
    for (const auto& token : sentence.tokens) {
      out += token.text;
      out += '\t';
      out += token.label;
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

Splits apply_split_fallback(Splits provided, bool has_dev, bool has_test) {
  if (has_dev && has_test) return provided;

  auto& train = provided.train;
  const std::size_t needed = 1 + (has_dev ? 0 : 1) + (has_test ? 0 : 1);
  if (train.size() < needed) {
    throw ConfigError("split fallback needs at least " + std::to_string(needed) + " sentences, got " +
                      std::to_string(train.size()));
  }
  auto carve = [&train](std::size_t count) {
    std::vector<Sentence> tail(std::make_move_iterator(train.end() - static_cast<long>(count)),
                               std::make_move_iterator(train.end()));
    train.erase(train.end() - static_cast<long>(count), train.end());
    return tail;
  };
  if (!has_test) {
    // leave room for a non-empty train (and dev, if it is carved next)
    const std::size_t reserve = has_dev ? 1 : 2;
    const std::size_t count = std::min(std::max<std::size_t>(train.size() / 5, 1), train.size() - reserve);
    provided.test = carve(count);
  }
  if (!has_dev) {
    const std::size_t count = std::min(std::max<std::size_t>(train.size() / 10, 1), train.size() - 1);
    provided.dev = carve(count);
  }
  return provided;
}

std::string normalize_term(std::string_view text, const TextOptions& options) {
  std::string out(text);
  if (options.lowercase) {
    for (char& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
  }
  return out;
}

std::set<std::string> vocabulary(const Dataset& dataset, SplitSelector selector, const TextOptions& options) {
  std::set<std::string> out;
  auto add = [&](const std::vector<Sentence>& part) {
    for (const auto& sentence : part) {
      for (const auto& token : sentence.tokens) out.insert(normalize_term(token.text, options));
    }
  };
  if (selector.train) add(dataset.splits.train);
  if (selector.dev) add(dataset.splits.dev);
  if (selector.test) add(dataset.splits.test);
  return out;
}

std::set<std::string> annotated_vocabulary(const Dataset& dataset, const TextOptions& options) {
  std::set<std::string> out;
  for (const auto& sentence : dataset.splits.train) {
    for (const auto& token : sentence.tokens) {
      if (token.label != kOutsideLabel) out.insert(normalize_term(token.text, options));
    }
  }
  return out;
}

TermDistribution term_distribution(const Dataset& dataset, const TextOptions& options) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& sentence : dataset.splits.train) {
    for (const auto& token : sentence.tokens) {
      ++counts[normalize_term(token.text, options)];
      ++total;
    }
  }
  if (total == 0) throw ConfigError("term distribution of '" + dataset.id + "': empty train split");
  TermDistribution dist;
  for (const auto& [term, count] : counts) {
    dist.probs.emplace(term, static_cast<double>(count) / static_cast<double>(total));
  }
  return dist;
}

std::size_t token_count(std::span<const Sentence> sentences) {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  std::vector<ManifestEntry> entries;
  std::unordered_set<std::string> seen;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_number;
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split_whitespace(line);
    if (fields.size() < 4 || fields.size() > 6) {
      throw ParseError("manifest record needs 4-6 fields: id task domain train [dev] [test]", line_number);
    }
    ManifestEntry entry;
    entry.id = fields[0];
    entry.task = fields[1];
    entry.domain = fields[2];
    entry.train_path = resolve(fields[3]);
    if (fields.size() > 4 && fields[4] != "-") entry.dev_path = resolve(fields[4]);
    if (fields.size() > 5 && fields[5] != "-") entry.test_path = resolve(fields[5]);
    if (!seen.insert(entry.id).second) throw ParseError("duplicate dataset id '" + entry.id + "'", line_number);
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(read_text_file(path), path.parent_path());
  } catch (const ParseError& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
}

Dataset load_dataset(const ManifestEntry& entry, const ParseOptions& options) {
  Splits splits;
  splits.train = read_split(entry.train_path, options, entry.id);
  if (entry.dev_path) splits.dev = read_split(*entry.dev_path, options, entry.id);
  if (entry.test_path) splits.test = read_split(*entry.test_path, options, entry.id);
  try {
    splits = apply_split_fallback(std::move(splits), entry.dev_path.has_value(), entry.test_path.has_value());
    return make_dataset(entry.id, entry.task, entry.domain, std::move(splits));
  } catch (const ConfigError& e) {
    throw ConfigError("dataset '" + entry.id + "': " + e.what());
  }
}

std::vector<Dataset> load_manifest(const std::filesystem::path& path, const ParseOptions& options) {
  std::vector<Dataset> out;
  for (const auto& entry : read_manifest(path)) out.push_back(load_dataset(entry, options));
  return out;
}

}  // namespace srcsel
