#pragma once

#include <stdexcept>
#include <string>

namespace estfuse {

// Inputs violating the non-zero-variance assumption (var_u > 0 and
// var_u + var_b - 2*cov_bu > 0). Raised instead of returning NaN/inf.
class degenerate_input_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Probabilities required to be strictly inside (0, 1).
class positivity_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or semantically invalid run configuration.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace estfuse
