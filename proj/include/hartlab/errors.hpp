#pragma once

#include <stdexcept>
#include <string>

namespace hartlab {

// Invalid configuration / precondition violation detected at entry.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Failure while computing (non-convergence, internal inconsistency).
struct RuntimeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hartlab
