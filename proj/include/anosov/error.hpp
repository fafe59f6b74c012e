#pragma once

#include <stdexcept>
#include <string>

namespace anosov {

// Base of every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputError : Error { using Error::Error; };
struct DegeneracyError : Error { using Error::Error; };
struct TransversalityError : Error { using Error::Error; };
struct LoxodromyError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct ResourceError : Error { using Error::Error; };
struct PresetIntegrityError : Error { using Error::Error; };
struct InsufficientDataError : Error { using Error::Error; };
struct PrecisionError : Error { using Error::Error; };
struct MissingInputError : Error { using Error::Error; };

// Raised when a requested parameter violates an admissibility condition;
// carries the largest admissible value.
struct ConditionError : Error {
    double max_admissible;
    ConditionError(const std::string& what, double max_ok) : Error(what), max_admissible(max_ok) {}
};

}  // namespace anosov
