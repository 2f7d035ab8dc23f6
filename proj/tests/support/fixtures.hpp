#pragma once

// Small hand-built corpora and filesystem helpers shared by the tests.

#include <filesystem>
#include <string>
#include <vector>

#include "srcsel/corpus.hpp"

namespace srcsel::testing {

/// "the/O Bosch/B-ORG" -> one sentence. The label follows the last '/'.
Sentence sentence(const std::string& tagged);
std::vector<Sentence> sentences(const std::vector<std::string>& tagged);

/// Dataset whose dev and test splits are copies of train unless given.
Dataset dataset(const std::string& id, const std::string& task, const std::vector<std::string>& train,
                const std::vector<std::string>& dev = {}, const std::vector<std::string>& test = {});

void write_text(const std::filesystem::path& path, const std::string& content);
std::string slurp(const std::filesystem::path& path);

/// Fresh directory under the system temp dir, removed with the object.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "srcsel-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace srcsel::testing
