#pragma once

#include <stdexcept>

namespace initlab {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Extent mismatches, zero extents, incompatible layer shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Argument values outside the documented domain (std < 0, batch_size < 1, ...).
struct ParameterError : Error {
    using Error::Error;
};

// Operations invoked in the wrong order (forward before init, backward
// without a cached forward pass).
struct StateError : Error {
    using Error::Error;
};

// Numerically rank-deficient input to a factorization.
struct RankDeficientError : Error {
    using Error::Error;
};

// Statistics requested on fewer elements than the estimator needs.
struct InsufficientDataError : Error {
    using Error::Error;
};

// Degenerate numeric situations: zero variance, zero norm, dead layers.
struct DegenerateError : Error {
    using Error::Error;
};

// Malformed external input (IDX files, config documents).
struct FormatError : Error {
    using Error::Error;
};

// Synthetic data generation could not satisfy its constraints.
struct GenerationError : Error {
    using Error::Error;
};

// Invalid or inconsistent experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace initlab
