#pragma once

#include <stdexcept>
#include <string>

namespace kimura {

// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// A series or quadrature did not reach its tolerance. The best available
// value is carried along so callers can decide what to do with it.
struct AccuracyError : std::runtime_error {
    double partial;
    AccuracyError(const std::string& what, double partial_value)
        : std::runtime_error(what), partial(partial_value) {}
};

// Floating-point breakdown: non-finite values, failed factorizations.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace kimura
