#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opicl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dimension or layout mismatch between arguments.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite value or failed numerical precondition.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Zero or near-zero pivot while factorizing or eliminating.
class SingularSystemError : public NumericError {
public:
    SingularSystemError(const std::string& what, std::size_t pivot_index)
        : NumericError(what), pivot_index_(pivot_index) {}

    std::size_t pivot_index() const noexcept { return pivot_index_; }

private:
    std::size_t pivot_index_;
};

/// Bad magic, unsupported version, truncated payload or malformed header.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid user-supplied configuration or data (e.g. an empty dataset).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A point lies outside the region covered by a partition of unity.
class CoverError : public Error {
public:
    using Error::Error;
};

/// The prompt leaves a needed cluster without samples.
class InsufficientPromptError : public Error {
public:
    using Error::Error;
};

} // namespace opicl
