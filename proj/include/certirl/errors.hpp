#pragma once

#include <stdexcept>
#include <string>

namespace certirl {

/// Malformed input file or config text.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string field, const std::string& what)
        : std::runtime_error("parse error at '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Well-formed input that violates a data-model invariant.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what, long layer = -1)
        : std::runtime_error(what), layer_(layer) {}
    /// 1-based layer index the problem was found at, or -1.
    long layer() const { return layer_; }

private:
    long layer_;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (l > u, negative lambda, stepping a finished episode, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace certirl
