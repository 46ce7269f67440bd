#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace ttn {

// Bad arguments, malformed files, contract violations at the call boundary.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A numerical precondition failed at run time (singular triangular factor in
// fast mode, audit preconditions, infeasible uniform-rank request, ...).
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void warn(const std::string& msg) {
  std::cerr << "[ttn] warning: " << msg << "\n";
}

}  // namespace ttn
