#ifndef PENTRL_COMMON_HPP_
#define PENTRL_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pentrl {

using Rng = std::mt19937_64;

enum class ErrorCode {
  kInvalidArgument = 1,
  kConfig = 2,
  kRuntime = 3,
  kIo = 4,
  kInvalidAction = 5,
  kParse = 6,
  kMismatch = 7,
  kNumeric = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCode::kConfig, w) {}
  // Carries the full list of problems found during validation.
  ConfigError(const std::vector<std::string>& problems);
  std::vector<std::string> problems;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(ErrorCode::kInvalidArgument, w) {}
};
struct InvalidAction : Error {
  explicit InvalidAction(const std::string& w) : Error(ErrorCode::kInvalidAction, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::kIo, w) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorCode::kParse, w) {}
};
struct MismatchError : Error {
  explicit MismatchError(const std::string& w) : Error(ErrorCode::kMismatch, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorCode::kNumeric, w) {}
};

// Deterministic derivation of independent stream seeds (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

namespace log {

enum class Level { kDebug, kInfo, kWarn, kError };

using Sink = std::function<void(Level, std::string_view)>;

// Replaces the process-wide sink; returns the previous one. Default writes to stderr.
Sink set_sink(Sink sink);
void set_min_level(Level level);
void write(Level level, std::string_view message);

inline void info(std::string_view m) { write(Level::kInfo, m); }
inline void warn(std::string_view m) { write(Level::kWarn, m); }
inline void debug(std::string_view m) { write(Level::kDebug, m); }

}  // namespace log

std::string read_text_file(const std::string& path);
// Writes via a temporary file and rename so readers never see partial output.
void write_text_file(const std::string& path, std::string_view content);

}  // namespace pentrl

#endif  // PENTRL_COMMON_HPP_
