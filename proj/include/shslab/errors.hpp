#pragma once

#include <stdexcept>
#include <string>

namespace shslab {

/// Malformed input document (schema or type violation). Maps to CLI exit code 2.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structurally invalid model or configuration. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: singular systems, solver non-convergence, unstable scenarios.
/// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace shslab
