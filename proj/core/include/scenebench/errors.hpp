#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scenebench {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed JSON. `byte_offset` points at the byte where the reader gave up.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

/// Well-formed input with the wrong shape (missing fields, count mismatches).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// An identifier or object spec that does not match its grammar.
class GrammarError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument outside the domain of the function.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Diversity label whose level-2 category does not belong to its level-1 theme.
class TaxonomyError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to a judge, composer, or generation backend.
/// Transient failures (timeouts, connection resets, 429/5xx) are retried.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool transient)
      : Error(what), transient_(transient) {}
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

}  // namespace scenebench
