#pragma once

#include <stdexcept>
#include <string>

namespace minbal {

// Argument outside the mathematical domain of a dispersion or its transforms.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed or inconsistent input data (CSV content, lengths, indicators).
class DataError : public std::runtime_error {
public:
    enum class Code {
        Generic,
        FileNotFound,
        EmptyFile,
        MissingColumn,
        ParseFailure,
        NonFiniteValue,
        InvalidIndicator,
        DimensionMismatch,
        EmptyGroup,
    };

    DataError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    explicit DataError(const std::string& what) : DataError(Code::Generic, what) {}

    Code code() const noexcept { return code_; }

private:
    Code code_;
};

// Numerical failure inside a solver or a factorization.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid combination of options (CLI flags, bench spec, tuning grid).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

const char* to_string(DataError::Code code) noexcept;

} // namespace minbal
