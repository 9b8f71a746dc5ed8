#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dlgdd {

// Exit codes used by the CLI; library errors carry the matching category.
enum class ErrorCode : int {
  usage = 2,
  data = 3,
  quota_shortfall = 4,
  numeric = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error(ErrorCode::usage, msg) {}
};
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(ErrorCode::data, msg) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& msg)
      : Error(ErrorCode::numeric, msg) {}
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable per-stage seed derivation: master seed -> (stage tag, index) -> seed.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(splitmix64(master ^ h) + index);
}

}  // namespace dlgdd
