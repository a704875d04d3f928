#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qbell {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A matrix or vector failed a physical-state invariant.
class StateError : public Error {
public:
    using Error::Error;
};

// An observable was not Hermitian.
class ObservableError : public Error {
public:
    using Error::Error;
};

// A precondition on arguments was violated.
class UsageError : public Error {
public:
    using Error::Error;
};

// Experiment configuration could not be resolved. `field()` names the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Malformed counts file; line() is 1-based, 0 when the whole file is at fault.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace qbell
