#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative numeric routine failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network or protocol failure talking to a remote model.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

class MalformedResponseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A replay fixture was asked for a (model, item) pair it never recorded.
class ReplayMissError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration file is syntactically or semantically invalid.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cascade
