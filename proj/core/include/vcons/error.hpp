#pragma once

#include <stdexcept>
#include <string>

namespace vcons {

// Coarse error classes. The CLI maps them onto exit codes:
// kUsage -> 1, kData/kShape/kMissingReference/kCorruptModel -> 2, kNumeric -> 3.
enum class ErrorKind {
  kUsage,
  kData,
  kShape,
  kMissingReference,
  kCorruptModel,
  kNumeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
      return 1;
    case ErrorKind::kNumeric:
      return 3;
    default:
      return 2;
  }
}

}  // namespace vcons
