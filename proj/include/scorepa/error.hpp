#pragma once

#include <stdexcept>
#include <string>

namespace scorepa {

/// Root of all library errors. `stage()` names the pipeline stage or operation
/// that failed; the CLI maps each subclass onto an exit code.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Malformed or out-of-contract user input (bad point counts, non-finite poses).
class InputError : public Error {
    using Error::Error;
};

/// A caller broke an API contract (shape mismatch, non-scalar loss).
class ContractError : public Error {
    using Error::Error;
};

/// An argument outside its admissible interval (e.g. time outside [0, T]).
class RangeError : public Error {
    using Error::Error;
};

/// A numerical computation produced non-finite values.
class NumericalError : public Error {
    using Error::Error;
};

/// Configuration file or flag problem.
class ConfigError : public Error {
    using Error::Error;
};

/// On-disk data could not be read: bad syntax, truncation, wrong magic.
class ParseError : public Error {
    using Error::Error;
};

class VersionError : public ParseError {
    using ParseError::ParseError;
};

}  // namespace scorepa
