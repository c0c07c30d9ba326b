#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace localguard {

/// Thrown when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeded generator used for every sampling, splitting and initialisation
/// step. std::mt19937_64 has a sequence fixed by the standard; the helpers
/// below avoid the standard distributions, whose output is not.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be positive.
  uint64_t below(uint64_t bound);

  /// Uniform double in [0, 1) built from the top 53 bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Lowercases ASCII letters; bytes >= 0x80 pass through unchanged.
std::string fold_case(std::string_view text);

std::string trim(std::string_view text);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Reads a file line by line; a trailing newline does not produce an extra
/// empty line.
std::vector<std::string> read_lines(const std::string& path);

}  // namespace localguard
