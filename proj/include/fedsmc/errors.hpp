#pragma once

#include <stdexcept>
#include <string>

namespace fedsmc {

// Bad arguments or misuse of an operation (empty input, invalid parameter).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Dimension mismatch between parameter vectors.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite value where finite arithmetic is required.
struct ArithmeticDomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Invalid experiment configuration; the message names the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violation of the aggregation protocol (missing, duplicate, or foreign
// message); the message identifies the offending hospital or round.
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed serialized input; the message carries the line number.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fedsmc
