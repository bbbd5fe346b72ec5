#pragma once

#include <stdexcept>
#include <string>

namespace hpl {

// Precondition broken by the caller (dimension mismatch, empty set, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Factorization failed; message names the offending hyperparameters.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hpl
