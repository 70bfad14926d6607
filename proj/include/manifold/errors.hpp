#ifndef MANIFOLD_ERRORS_HPP
#define MANIFOLD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace manifold {

// Bad arguments or malformed configuration. CLI maps these to exit code 1.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Runtime failures (exit code 2).
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double time)
      : std::runtime_error(what), time_of_failure(time) {}
  double time_of_failure;
};

class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// I/O failures carry a kind so callers can distinguish a corrupt header from a
// file that simply ended early.
class IoError : public std::runtime_error {
 public:
  enum class Kind { Io, Corruption, Truncation, Unsupported };
  IoError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
  Kind kind;
};

}  // namespace manifold

#endif
