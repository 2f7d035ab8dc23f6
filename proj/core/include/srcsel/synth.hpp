#pragma once

// Deterministic synthetic sequence-labeling corpora. Domains sit on a circle:
// each word of the shared lexicon has an angle, and a domain prefers words
// whose angle is near its own, so vocabulary overlap falls off smoothly with
// angular distance.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srcsel/corpus.hpp"

namespace srcsel {

struct SynthSpec {
  std::string id;
  /// "NER" (PER, LOC, ORG spans), "TIME" (DATE, TIME spans) or "POS" (per-token tags).
  std::string task = "NER";
  std::string domain;
  double angle = 0.0;          // radians
  double concentration = 4.0;  // sharpness of the domain's word preference
  std::size_t train = 60;
  std::size_t dev = 15;
  std::size_t test = 20;
  std::uint64_t seed = 1;
};

/// Every label of the task occurs in every split, so datasets of one task
/// always share a label set.
Dataset synthesize(const SynthSpec& spec);

/// Nine datasets over three tasks and six domains.
std::vector<SynthSpec> default_suite(std::uint64_t seed = 1);

/// Writes `<id>.train.conll`, `<id>.dev.conll`, `<id>.test.conll` per spec plus
/// `manifest.tsv` into `directory`; returns the manifest path.
std::filesystem::path write_suite(const std::filesystem::path& directory, const std::vector<SynthSpec>& specs);

}  // namespace srcsel
