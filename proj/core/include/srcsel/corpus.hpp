#pragma once

// CoNLL-style sequence-labeling corpora: parsing, split handling, manifests,
// and the vocabulary/term statistics the similarity measures consume.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srcsel {

inline constexpr std::string_view kOutsideLabel = "O";

struct Token {
  std::string text;
  std::string label;

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;

  bool operator==(const Sentence&) const = default;
  std::size_t size() const noexcept { return tokens.size(); }
};

enum class SplitName { Train, Dev, Test };

std::string_view split_name(SplitName split);

struct Splits {
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
  std::vector<Sentence> test;
};

/// A labeled corpus identified by its (task, domain) pair.
/// `label_set` holds every tag except the outside tag "O".
struct Dataset {
  std::string id;
  std::string task;
  std::string domain;
  std::set<std::string> label_set;
  Splits splits;

  const std::vector<Sentence>& split(SplitName which) const;
};

/// Builds a dataset, deriving the label set from all three splits.
/// Throws ConfigError if any split is empty.
Dataset make_dataset(std::string id, std::string task, std::string domain, Splits splits);

/// True when labels follow the BIO scheme (spans are scored), false for plain
/// per-token tags such as POS.
bool is_span_task(const Dataset& dataset);
bool is_span_labeling(const std::set<std::string>& labels);

struct ParseOptions {
  /// Reject orphan I- tags instead of repairing them to B-.
  bool strict_bio = false;
};

/// Parses UTF-8 CoNLL text: one `token<TAB>label` per line (runs of spaces also
/// separate columns, the last column is the label), blank line ends a sentence,
/// `-DOCSTART-` lines are skipped.
std::vector<Sentence> parse_conll(std::string_view raw, const ParseOptions& options = {});

/// Inverse of parse_conll for repaired input: tab-separated, blank line after each sentence.
std::string serialize_conll(std::span<const Sentence> sentences);

/// Carves missing dev/test splits off the end of `provided.train`: the last
/// 20% (floor) becomes test, then the last 10% (floor) of what remains becomes
/// dev, each at least one sentence. Order is preserved.
Splits apply_split_fallback(Splits provided, bool has_dev, bool has_test);

struct TextOptions {
  bool lowercase = false;
};

/// Token text as the overlap measures see it.
std::string normalize_term(std::string_view text, const TextOptions& options);

struct SplitSelector {
  bool train = true;
  bool dev = false;
  bool test = false;
};

std::set<std::string> vocabulary(const Dataset& dataset, SplitSelector selector = {},
                                 const TextOptions& options = {});

/// Terms carrying a non-O label in the train split.
std::set<std::string> annotated_vocabulary(const Dataset& dataset, const TextOptions& options = {});

struct TermDistribution {
  std::map<std::string, double> probs;
};

/// Relative frequencies of train-split terms. Throws ConfigError on an empty train split.
TermDistribution term_distribution(const Dataset& dataset, const TextOptions& options = {});

std::size_t token_count(std::span<const Sentence> sentences);

// ---------------------------------------------------------------------------
// Manifests

struct ManifestEntry {
  std::string id;
  std::string task;
  std::string domain;
  std::filesystem::path train_path;
  std::optional<std::filesystem::path> dev_path;
  std::optional<std::filesystem::path> test_path;
};

/// One whitespace-separated record per line:
///   id task domain train_path [dev_path|-] [test_path|-]
/// `#` starts a comment line. Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Loads and validates one dataset. Errors name the dataset id.
Dataset load_dataset(const ManifestEntry& entry, const ParseOptions& options = {});
std::vector<Dataset> load_manifest(const std::filesystem::path& path, const ParseOptions& options = {});

std::string read_text_file(const std::filesystem::path& path);

}  // namespace srcsel
