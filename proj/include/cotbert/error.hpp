#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cotbert {

enum class ErrorKind {
  config,    // invalid configuration, unknown keys, bad enum values
  input,     // malformed or empty user input
  io,        // unreadable/unwritable files
  shape,     // dimension mismatch between tensors
  numeric,   // non-finite values, zero-norm vectors, undefined statistics
  internal,  // broken invariant inside the library
};

std::string_view to_string(ErrorKind kind);

/// Base exception for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// CLI exit code: 1 for input/config problems, 2 for runtime/numeric failures.
  int exit_code() const noexcept;

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace cotbert
