#pragma once

#include <stdexcept>
#include <string>

namespace bankfair {

// Base for every error raised by the library. Callers that only care about
// "did it work" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (unknown rule, bad ranges, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `row` is 1-based and counts the header line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  long row() const { return row_; }

 private:
  long row_;
};

// Input data that parses but contradicts itself, e.g. an item listed under
// two providers.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Value outside a function's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Bankruptcy instance whose estate cannot be covered by the claims.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, int provider = -1, int interval = -1)
      : Error(what), provider_(provider), interval_(interval) {}
  int provider() const { return provider_; }
  int interval() const { return interval_; }

 private:
  int provider_;
  int interval_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bankfair
