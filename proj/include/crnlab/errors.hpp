#pragma once

#include <stdexcept>
#include <string>

namespace crnlab {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Syntax or grammar error while reading network text. Carries a
/// 1-based line/column of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& message, int line, int column)
        : Error("parse error at " + std::to_string(line) + ":" + std::to_string(column) +
                ": " + message),
          line_(line),
          column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_ = 0;
    int column_ = 0;
};

/// Invalid configuration or precondition violation. `field` names the
/// offending config key or argument so callers can fail closed.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Runtime failure inside a time integration.
class SimulationError : public Error {
public:
    enum class Kind {
        NonFinite,         // NaN or Inf appeared in the state
        NegativityBreach,  // some value dropped below -negativity_tol
    };

    SimulationError(Kind kind, const std::string& message, double time)
        : Error(message), kind_(kind), time_(time) {}

    Kind kind() const { return kind_; }
    double time() const { return time_; }

private:
    Kind kind_;
    double time_ = 0.0;
};

}  // namespace crnlab
