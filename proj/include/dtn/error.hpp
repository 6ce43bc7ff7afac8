#pragma once

#include <stdexcept>
#include <string>

namespace dtn {

enum class ErrorKind {
  config,     // bad arguments, invalid topology, out-of-range rates
  data,       // unreadable or malformed dataset / checkpoint files
  numerical,  // non-finite values, eigensolver failure, divergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code for an error kind: 2 config, 3 data, 4 numerical.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerical: return 4;
  }
  return 1;
}

[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorKind::config, what); }
[[noreturn]] inline void numerical_error(const std::string& what) { throw Error(ErrorKind::numerical, what); }

}  // namespace dtn
