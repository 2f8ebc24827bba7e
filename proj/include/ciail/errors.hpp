#pragma once

#include <stdexcept>
#include <string>

namespace ciail {

// Root of every error raised by the library. Subclasses map one-to-one onto
// the failure modes callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class StaleTapeError : public Error {
 public:
  using Error::Error;
};

// A non-finite gradient reached an optimizer.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string param, const std::string& what)
      : Error("training divergence in '" + param + "': " + what),
        param_(std::move(param)) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

class EpisodeFinishedError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Violated precondition of a documented operation contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

class EmptyBucketError : public Error {
 public:
  using Error::Error;
};

class DegenerateSettingError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Ground-truth reward reached a learning path.
class TaintError : public Error {
 public:
  using Error::Error;
};

}  // namespace ciail
