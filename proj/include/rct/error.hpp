#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rct {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model or design parameter is outside its domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Vector/matrix shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A least-squares design is rank deficient. `column()` is the first column
/// found to be (numerically) in the span of the columns before it.
class SingularityError : public Error {
public:
    SingularityError(const std::string& what, std::size_t column)
        : Error(what), column_(column) {}
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

/// Too few observations for the requested estimator.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// More plots requested than the population holds.
class EnrollmentError : public Error {
public:
    using Error::Error;
};

/// Arm sizes inconsistent with the enrolled sample.
class DesignError : public Error {
public:
    using Error::Error;
};

class SizeLimitError : public Error {
public:
    using Error::Error;
};

/// Per-arm regression could not be fit.
class FitError : public Error {
public:
    FitError(const std::string& what, int arm) : Error(what), arm_(arm) {}
    int arm() const noexcept { return arm_; }

private:
    int arm_;
};

/// No regime satisfies the budget.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Too many replicates in a scenario failed.
class ScenarioAbort : public Error {
public:
    using Error::Error;
};

/// Malformed configuration or input file. Line/column are 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0, int column = 0)
        : Error(what), line_(line), column_(column) {}
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

}  // namespace rct
