#pragma once

#include <stdexcept>
#include <string>

namespace lsi {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SameIndex : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NotPositiveDefinite : std::domain_error {
    using std::domain_error::domain_error;
};

struct NotNormalizable : std::domain_error {
    using std::domain_error::domain_error;
};

// Requested spec family is outside the supported decomposition classes.
struct NoDecomposition : std::domain_error {
    using std::domain_error::domain_error;
};

struct SupportTooLarge : std::length_error {
    using std::length_error::length_error;
};

struct CapacityExceeded : std::length_error {
    using std::length_error::length_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lsi
