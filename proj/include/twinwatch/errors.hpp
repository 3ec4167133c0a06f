#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace twinwatch {

/// Input violates a documented invariant. `field` names the offending element.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& message)
        : std::runtime_error(message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Malformed input text (JSON syntax, wrong value types).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace twinwatch
