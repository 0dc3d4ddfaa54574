#pragma once
#include <stdexcept>
#include <string>

namespace commitlab {

struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct UnsupportedRule : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ZeroGradientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when an update produces NaN/Inf or leaves the simplex.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace commitlab
