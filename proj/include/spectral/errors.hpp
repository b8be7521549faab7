#pragma once

#include <stdexcept>
#include <string>

namespace spectral {

// Invalid arguments or parameters outside their admissible set.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Iterations that did not converge, NaNs, insufficient numerical domains.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent run configuration (grids violating stability, degenerate inputs).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A mathematical invariant failed; signals a bug rather than bad input.
struct InvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace spectral
