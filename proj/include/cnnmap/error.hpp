#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cnnmap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A layer whose dimensions violate the convolution identities.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or incomplete configuration (platform, experiment, mapping).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// No tiling of a layer fits the core's SRAM.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, long long min_alloc_words)
      : Error(what), min_alloc_words_(min_alloc_words) {}
  long long min_alloc_words() const { return min_alloc_words_; }

 private:
  long long min_alloc_words_;
};

/// The simulation made no progress within the watchdog horizon.
class DeadlockError : public Error {
 public:
  using Error::Error;
};

}  // namespace cnnmap
