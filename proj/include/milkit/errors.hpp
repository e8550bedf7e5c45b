#pragma once

#include <stdexcept>
#include <string>

namespace milkit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant or precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Shapes of two operands disagree (feature dim vs checkpoint, tensor shapes).
class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Filesystem access failed.
class IoError : public Error {
public:
    using Error::Error;
};

/// File content has the wrong magic, version or layout.
class FormatError : public Error {
public:
    using Error::Error;
};

/// File content is shorter than its header promises.
class CorruptionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Loss or parameters became NaN/Inf.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace milkit
