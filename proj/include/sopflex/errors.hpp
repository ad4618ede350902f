#pragma once

#include <stdexcept>
#include <string>

namespace sopflex {

// File or text could not be interpreted. Message carries line/field context.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A model invariant is violated. Message names the invariant.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iterative solver failed to reach its tolerance.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Optimization-level failure (stall, bad big-M, internal inconsistency).
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sopflex
