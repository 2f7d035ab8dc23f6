#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srcsel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid configuration or arguments that violate an operation's preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between vectors or matrices.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was run before the stage that produces its inputs.
class DependencyError : public Error {
 public:
  using Error::Error;
};

/// Deterministic random source. The mt19937_64 output sequence is fixed by the
/// standard, and all conversions below are done by hand so that results do not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Standard normal via Box-Muller (one value per call).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a textual tag into a seed so that independent consumers of one
/// top-level seed draw from unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Fixed-point formatting ("%.Nf") with negative zero printed as zero.
std::string format_fixed(double value, int decimals);

/// Shortest "%.12g" rendering, the persistence precision for weights and features.
std::string format_sig12(double value);

/// Rounds to 12 significant digits (the value a "%.12g" round trip yields).
double round_sig12(double value);

/// Rounds to the given number of decimals exactly as "%.Nf" prints the value.
double round_decimals(double value, int decimals);

std::vector<std::string> split_fields(std::string_view line, char delimiter);
std::vector<std::string> split_whitespace(std::string_view line);
std::string join(const std::vector<std::string>& parts, std::string_view delimiter);
std::string_view trim(std::string_view text);

/// Strict numeric parsing; throws ParseError on trailing garbage.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

}  // namespace srcsel
