#pragma once

#include <stdexcept>
#include <string>

namespace inper {

// Shape or rank of a tensor argument does not fit the operation.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Bad numeric argument: negative probability, non-positive parameter,
// out-of-range label, NaN/Inf payload.
struct ValueError : std::invalid_argument {
    explicit ValueError(const std::string& what) : std::invalid_argument(what) {}
};

// A vector that must have positive norm is all zeros.
struct ZeroNormError : std::invalid_argument {
    explicit ZeroNormError(const std::string& what) : std::invalid_argument(what) {}
};

// Configuration that cannot be applied, e.g. a patch grid finer than the map.
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Corrupt or truncated file payload.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Missing file, unknown domain id, and similar lookups.
struct NotFoundError : std::runtime_error {
    explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse, e.g. backward without a cached forward.
struct UsageError : std::logic_error {
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace inper
