#pragma once

#include <stdexcept>
#include <string>

namespace fairgame {

/// Raised when an argument lies outside the mathematical domain of an operation
/// (non-positive payoffs, alpha outside [0,1], negative consumptions, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The altruism threshold would exceed 1 (T*S > R^2).
class ConsistencyError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Mismatched tensor/table dimensions or out-of-range indices.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a protocol invariant, e.g. an update fed with stale rollouts.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input document (JSON game/config/log files).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fairgame
