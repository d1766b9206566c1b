#pragma once

#include <stdexcept>
#include <string>

namespace sess {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidArgs : public Error {
public:
    using Error::Error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

class EmptyGroup : public Error {
public:
    using Error::Error;
};

/// A column has zero sample variance and cannot be standardized.
class ConstantColumn : public Error {
public:
    explicit ConstantColumn(int column_index)
        : Error("column " + std::to_string(column_index) + " is constant (zero sample variance)"),
          column(column_index) {}
    int column;
};

/// A column is identically zero where a nonzero norm is required.
class ZeroColumn : public Error {
public:
    using Error::Error;
};

/// Every (k, j) block pair has been excluded from scoring.
class AllBlocksExcluded : public Error {
public:
    using Error::Error;
};

/// A residual norm underflowed to (numerical) zero; the log-likelihood
/// term of the selection criterion is undefined for this state.
class PerfectFit : public Error {
public:
    using Error::Error;
};

/// A response column would be fit with at least as many predictors as rows.
class Overcapacity : public Error {
public:
    using Error::Error;
};

/// No partition of the requested length into the allowed group sizes exists.
class InfeasiblePartition : public Error {
public:
    using Error::Error;
};

/// Malformed input text (CSV cell, groups file, config document).
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line_number, long column_number = 0)
        : Error(what + " (line " + std::to_string(line_number) +
                (column_number > 0 ? ", column " + std::to_string(column_number) : "") + ")"),
          line(line_number), column(column_number) {}
    long line;
    long column;
};

/// Filesystem failure (open, write, rename).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace sess
