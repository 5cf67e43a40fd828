#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evz {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kBackend,
  kProtocol,
  kLocked,
  kState,
  kNoValidRollouts,
  kEmptyInput,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// FNV-1a over bytes; `seed` chains multiple pieces into one digest.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ull);
std::string to_hex(std::uint64_t v);

// Derives a stream seed from a base seed and a list of string tokens.
// Stable across platforms and runs.
std::uint64_t mix_seed(std::uint64_t base,
                       std::initializer_list<std::string_view> tokens);

// SplitMix64. Used instead of <random> engines/distributions so that
// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform01();                      // [0, 1)
  std::uint64_t bounded(std::uint64_t n);  // [0, n), rejection sampled

 private:
  std::uint64_t state_;
};

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
    std::swap(items[i - 1], items[j]);
  }
}

std::string read_text_file(const std::filesystem::path& path);
// Writes via a temp file + rename so readers never observe partial content.
void write_text_file_atomic(const std::filesystem::path& path,
                            std::string_view content);

// Shortest representation that parses back to the same double ("0.1", "1e-06").
std::string format_double(double v);
// Fixed-notation seconds for prompt text ("30", "12.5", "0.333").
std::string format_seconds(double v);
// Half away from zero at two decimals.
double round2(double v);

std::string lowercase(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace evz
