#pragma once

#include <stdexcept>
#include <string>

namespace ecgadv {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (bad length, even kernel size, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed input text. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input whose content breaks a domain rule.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class StratificationError : public Error {
 public:
  using Error::Error;
};

// ModelSpec / params shapes do not chain.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Weights file is truncated or fails its checksum.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedVersion : public Error {
 public:
  UnsupportedVersion(const std::string& what, unsigned version)
      : Error(what), version_(version) {}
  unsigned version() const noexcept { return version_; }

 private:
  unsigned version_;
};

}  // namespace ecgadv
