#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecorank {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad pipeline, unknown backend, invalid params.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidSplit : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvalidTask : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateQueryId : public ParseError {
 public:
  using ParseError::ParseError;
};

class MissingCorpusText : public Error {
 public:
  using Error::Error;
};

class MissingScores : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

/// Raised by backends when a completion cannot be produced.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Network-level failure of the HTTP backend after all retries.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace ecorank
