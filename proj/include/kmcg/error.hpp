#pragma once

#include <stdexcept>
#include <string>

namespace kmcg {

// Error categories. The CLI maps these onto its exit codes and the C API onto
// kmcg_status values, so keep the two tables in sync.
enum class ErrorKind {
  usage,      // bad arguments or configuration
  data,       // malformed or missing input data
  io,         // filesystem failures
  numerical,  // divergence, non-finite values, failed decompositions
  contract,   // violated preconditions between library components
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace kmcg
