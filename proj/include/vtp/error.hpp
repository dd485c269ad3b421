#pragma once

#include <stdexcept>
#include <string>

namespace vtp {

/// Thrown when an argument violates an operation's contract.
class InvalidInput : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a cosine similarity would divide by a zero-norm vector.
class ZeroNormToken : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace vtp
