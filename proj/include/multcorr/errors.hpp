#pragma once

#include <stdexcept>
#include <string>

namespace multcorr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A declared bound or structural invariant was broken by the input.
struct InvariantError : Error {
    using Error::Error;
};

// Value outside the domain an operation accepts.
struct DomainError : Error {
    using Error::Error;
};

struct OverflowError : Error {
    using Error::Error;
};

struct BudgetError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace multcorr
