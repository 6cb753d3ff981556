#pragma once

#include <stdexcept>
#include <string>

namespace elicit {

/// Input violates an operation's contract (bad dimensions, unknown ids, malformed responses).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation is not valid in the object's current state (terminal session, pending query, ...).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Persisted data could not be parsed: truncated, corrupt, or from an unsupported format version.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a usable result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace elicit
