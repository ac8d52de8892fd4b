#pragma once

#include <stdexcept>
#include <string>

namespace ordernet {

// Violated preconditions: shape mismatches, invalid permutations, bad config.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problem size exceeds a hard solver cap.
struct ResourceError : ContractError {
  using ContractError::ContractError;
};

// Filesystem and parse failures; messages carry the offending path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ordernet
