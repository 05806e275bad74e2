#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace srae {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file. `line` is 1-based, 0 when not applicable.
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line(line) {}
    std::size_t line;
};

// Input data violates a documented precondition.
struct ValidationError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Divergence, NaN, singular numerics.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace srae
