#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "srcsel/common.hpp"

namespace srcsel::testing {

Sentence sentence(const std::string& tagged) {
  Sentence s;
  for (const auto& item : split_whitespace(tagged)) {
    const auto slash = item.rfind('/');
    s.tokens.push_back(Token{item.substr(0, slash), item.substr(slash + 1)});
  }
  return s;
}

std::vector<Sentence> sentences(const std::vector<std::string>& tagged) {
  std::vector<Sentence> out;
  for (const auto& t : tagged) out.push_back(sentence(t));
  return out;
}

Dataset dataset(const std::string& id, const std::string& task, const std::vector<std::string>& train,
                const std::vector<std::string>& dev, const std::vector<std::string>& test) {
  Splits splits;
  splits.train = sentences(train);
  splits.dev = dev.empty() ? splits.train : sentences(dev);
  splits.test = test.empty() ? splits.train : sentences(test);
  return make_dataset(id, task, "fixture", std::move(splits));
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

TempDir::TempDir(const std::string& prefix) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ignored;
  std::filesystem::remove_all(path_, ignored);
}

}  // namespace srcsel::testing
