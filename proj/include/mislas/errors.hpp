#pragma once

#include <stdexcept>
#include <string>

namespace mislas {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument lies outside the domain of the operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A call violated the calling contract (wrong state, wrong kind of input).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A sanctioned operation produced NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int stage, int epoch, const std::string& what)
      : std::runtime_error(what), stage_(stage), epoch_(epoch) {}
  int stage() const { return stage_; }
  int epoch() const { return epoch_; }

 private:
  int stage_;
  int epoch_;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mislas
