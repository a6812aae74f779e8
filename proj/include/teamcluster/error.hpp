#pragma once

#include <stdexcept>
#include <string>

namespace teamcluster {

enum class ErrorKind {
  Schema,       // malformed input, missing column, duplicate key, column mismatch
  Parse,        // unparseable numeric cell
  Parameter,    // argument outside its documented domain
  EmptyInput,
  Degenerate,   // degenerate sample/degree/clustering
  Unsplittable,
  NoSignal,
  Numerical,    // solver failure
  Io,
};

const char* to_string(ErrorKind kind);

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

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace teamcluster
