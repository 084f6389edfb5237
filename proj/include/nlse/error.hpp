#pragma once

#include <stdexcept>
#include <string>

namespace nlse {

// Bad dimensions, bad topology, invalid training configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation (beta <= 0, t outside the window, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// API called in the wrong order, e.g. backward() before a forward pass was recorded.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite loss during training.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long epoch) : std::runtime_error(what), epoch_(epoch) {}
  long epoch() const noexcept { return epoch_; }

 private:
  long epoch_;
};

}  // namespace nlse
