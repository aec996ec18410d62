#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hamts {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid input data: malformed cells, boundary normalization failures,
// non-Hermitian blocks, and similar construction-time rejections.
struct ValidationError : Error {
    using Error::Error;
};

// Runtime numerical failure: singular step matrices, diverging root polish,
// step-size underflow, definiteness never attained.
struct NumericalError : Error {
    using Error::Error;
};

// A rank or classification estimate that cannot be settled from the given
// b-list tail (neither converged nor clearly divergent).
struct InconclusiveError : Error {
    using Error::Error;
};

// Expression syntax error; `offset` is the 0-based position in the source.
struct ParseError : ValidationError {
    std::size_t offset;
    ParseError(const std::string& msg, std::size_t off)
        : ValidationError(msg), offset(off) {}
};

}  // namespace hamts
