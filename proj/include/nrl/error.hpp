#pragma once

#include <stdexcept>
#include <string>

namespace nrl {

// Mirrors nrl_status in nrl.h; values must stay in sync.
enum class ErrorCode : int {
  kInvalidInput = 1,
  kAssumptionViolation = 2,
  kInfeasibleRescale = 3,
  kConfig = 4,
  kIo = 5,
  kInternal = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace nrl
