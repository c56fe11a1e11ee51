#pragma once

#include <stdexcept>

namespace mcal {

// Precondition or shape violation on a library call.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation (e.g. non-finite logits).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Non-finite loss during an optimization loop; message names the step.
struct OptimizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File ingestion or deserialization failure; message names the row/column/field.
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problem size exceeds what an exact method can enumerate.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degenerate surrogate regression inside an explainer.
struct ExplainerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mcal
