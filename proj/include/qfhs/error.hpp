#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qfhs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A distribution or model parameter is outside its admissible set.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed input text (CSV rows, dates, config files).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Inputs of mismatched or insufficient length.
class LengthError : public Error {
public:
    using Error::Error;
};

/// A recursive filter produced a non-finite value.
class NonFiniteError : public Error {
public:
    NonFiniteError(const std::string& what, std::size_t index)
        : Error(what + " (first non-finite value at t=" + std::to_string(index) + ")"),
          index_(index) {}

    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Too few observations in a tail to form an estimate.
class EmptyTailError : public Error {
public:
    using Error::Error;
};

/// Optimizer could not produce a finite result.
class OptimizerError : public Error {
public:
    using Error::Error;
};

/// Mismatch between forecast records and the realized series.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// Numerical linear algebra failure (singular or rank-deficient systems).
class SingularError : public Error {
public:
    using Error::Error;
};

/// Study configuration does not match the schema.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace qfhs
