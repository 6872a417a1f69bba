#pragma once

#include <stdexcept>
#include <string>

namespace e2lmvsc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
    using Error::Error;
};
struct NotPositiveDefinite : Error {
    using Error::Error;
};
struct AsymmetricInput : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    using Error::Error;
};
struct BadLabel : Error {
    using Error::Error;
};
struct LengthMismatch : Error {
    using Error::Error;
};
struct MissingFile : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct NonFiniteGradient : Error {
    using Error::Error;
};
struct NonFiniteLoss : Error {
    using Error::Error;
};

} // namespace e2lmvsc
