#pragma once

#include <stdexcept>
#include <string>

namespace refinecsp {

enum class ErrorKind {
  invalid_argument,
  shape_mismatch,
  out_of_range,
  numeric_failure,
  io,
  format,
  incompatible,
};

/// Exception carried by every failing operation in the library. The kind
/// maps one-to-one onto the C API status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace refinecsp
