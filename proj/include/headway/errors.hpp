#pragma once

#include <stdexcept>
#include <string>

namespace headway {

// Invalid scenario parameters or overrides.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Topology problems (no route between an origin and its destination, bad path).
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A function was called outside its mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Simulator state broke an invariant (NaN, negative count, density above jam).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace headway
