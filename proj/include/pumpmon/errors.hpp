#pragma once

#include <stdexcept>
#include <string>

namespace pumpmon {

// Caller passed something the contract forbids (bad shape request, unknown
// pump id, invalid hyperparameter). Maps to CLI exit code 2.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data that is well-formed but structurally incompatible with the operation,
// e.g. feeding a 3-channel tensor to a 6-channel model.
class StructuralError : public std::runtime_error {
public:
    explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (diverged training,
// NaN gradients).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input file is not syntactically valid for its format. Carries the
// 1-based line number when the format is line-oriented.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, long line = 0)
        : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_ = 0;
};

// Input parsed fine but violates the schema (missing field, wrong arity,
// bad label value).
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

// A metric was requested on a population where it has no definition,
// e.g. false-positive rate with zero negatives.
class UndefinedMetricError : public std::runtime_error {
public:
    explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace pumpmon
