#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace tensorhar {

// Coarse error categories. The CLI reports them in its machine-readable
// error document, so the spelling returned by to_string() is part of the
// interface.
enum class ErrorKind {
  invalid_argument,
  dimension_mismatch,
  out_of_range,
  empty_input,
  parse_error,
  io_error,
  format_error,
  unsupported,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::out_of_range: return "out_of_range";
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::parse_error: return "parse_error";
    case ErrorKind::io_error: return "io_error";
    case ErrorKind::format_error: return "format_error";
    case ErrorKind::unsupported: return "unsupported";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(ErrorKind kind, Args&&... args) {
  throw Error(kind, detail::concat(std::forward<Args>(args)...));
}

template <typename... Args>
void require(bool cond, ErrorKind kind, Args&&... args) {
  if (!cond) fail(kind, std::forward<Args>(args)...);
}

}  // namespace tensorhar
