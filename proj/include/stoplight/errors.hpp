#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stoplight {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (Δ = 0 in a ratio, zero-energy pulse, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Operation called on a configuration it does not support (e.g. closed form with r != 1).
class UnsupportedConfiguration : public Error {
public:
    using Error::Error;
};

/// Failure while running a simulation: solver non-convergence, instability, missing peak.
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

/// Scenario or schedule validation failure. Carries every problem found, each
/// prefixed with the path of the offending field.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out = "validation failed:";
        for (const auto& p : problems) {
            out += "\n  ";
            out += p;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

}  // namespace stoplight
