#pragma once

#include <stdexcept>
#include <string>

namespace suquan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: non-finite values, empty vectors, bad labels, bad flags.
class InvalidInput : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InvalidInput {
public:
    DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
        : InvalidInput(what + ": expected dimension " + std::to_string(expected) +
                       ", got " + std::to_string(got)) {}
    using InvalidInput::InvalidInput;
};

/// A target quantile collapsed to a constant (or the LDA matrix vanished).
class DegenerateQuantile : public Error {
public:
    using Error::Error;
};

/// Only one class present where two are required.
class DegenerateLabels : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// Non-finite intermediate or other numerical breakdown.
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

inline void require_same_size(const char* what, std::size_t expected, std::size_t got)
{
    if (expected != got) throw DimensionMismatch(what, expected, got);
}

} // namespace suquan
