#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsf {

// Base of every error raised by the library. Callers that only need a
// message can catch this; the CLI maps the subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or vector dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments to an operation (bad frame sizes, parameter ranges).
class InputError : public Error {
 public:
  using Error::Error;
};

// Missing or inconsistent data: absent files, empty label sets, bad indices.
class DataError : public Error {
 public:
  using Error::Error;
};

// On-disk file that fails to parse. Carries the byte offset of the fault.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Variational flow solver whose energy went up at some pyramid level.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int level)
      : Error(what + " (pyramid level " + std::to_string(level) + ")"), level_(level) {}

  int level() const noexcept { return level_; }

 private:
  int level_;
};

// Non-finite training loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t batch)
      : Error(what + " (batch " + std::to_string(batch) + ")"), batch_(batch) {}

  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t batch_;
};

// Classifier training that cannot proceed (e.g. a single class).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Bad configuration or command line.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsf
