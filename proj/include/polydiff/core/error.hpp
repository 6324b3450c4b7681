#pragma once

#include <stdexcept>
#include <string>

namespace polydiff {

/// Base of every error raised by the library. `exit_code()` is the process
/// status the command-line front end reports for it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Invalid argument or violated precondition.
class ArgumentError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Shape or width mismatch between operands, configs or checkpoints.
class DimensionError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Malformed input file.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line = -1)
        : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    long line() const noexcept { return line_; }
    int exit_code() const noexcept override { return 3; }

private:
    long line_;
};

/// Input data that parses but cannot be used (missing files, empty sets).
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Non-finite values, failed solves, degenerate geometry.
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// A constructed object violates a structural invariant (open boundary,
/// inverted cells, colliding planes).
class ValidityError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace polydiff
