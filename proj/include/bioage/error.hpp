#pragma once

#include <stdexcept>
#include <string>

namespace bioage {

// Each error class maps to one CLI exit code (see cli/commands.hpp).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
    using Error::Error;
};

struct StabilityViolation : Error {
    using Error::Error;
};

struct SolverFailure : Error {
    using Error::Error;
};

struct InsufficientSample : SolverFailure {
    using SolverFailure::SolverFailure;
};

struct BracketFailure : Error {
    using Error::Error;
};

inline void require(bool ok, const std::string& what)
{
    if (!ok)
        throw InvalidInput(what);
}

} // namespace bioage
