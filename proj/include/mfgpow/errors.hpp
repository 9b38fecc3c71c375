#pragma once

#include <stdexcept>
#include <string>

namespace mfgpow {

// Validation failures name the offending field; they map to CLI exit code 2.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Non-convergence, domain-truncation violations, paths leaving the grid.
// Maps to CLI exit code 3.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable/unwritable files, malformed input data. Maps to exit code 4.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mfgpow
