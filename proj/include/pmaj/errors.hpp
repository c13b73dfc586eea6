#pragma once

#include <stdexcept>
#include <string>

namespace pmaj {

// Base for every library error so callers can catch one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SyntaxError : Error {
    std::size_t offset;
    SyntaxError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset(byte_offset) {}
};

struct UnknownIdentifier : Error {
    std::size_t offset;
    UnknownIdentifier(const std::string& name, std::size_t byte_offset)
        : Error("unknown identifier '" + name + "' (at byte " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
};

struct DomainError : Error {
    double x;
    DomainError(const std::string& what, double at_x)
        : Error(what + " (at x = " + std::to_string(at_x) + ")"), x(at_x) {}
};

struct ShapeMismatch : Error {
    using Error::Error;
};

struct NotAdmissible : Error {
    using Error::Error;
};

struct BisectionFailure : Error {
    using Error::Error;
};

struct UnsupportedOrder : Error {
    using Error::Error;
};

struct CordesViolated : Error {
    using Error::Error;
};

struct NotPositiveDefinite : Error {
    using Error::Error;
};

struct SingularityNotIntegrable : Error {
    using Error::Error;
};

struct SkewSymmetryViolated : Error {
    using Error::Error;
};

struct LoadNotZeroMean : Error {
    using Error::Error;
};

struct NotDivergenceFree : Error {
    using Error::Error;
};

struct InfeasibleExponent : Error {
    using Error::Error;
};

struct ConfigError : Error {
    std::string pointer;  // JSON pointer of the offending field
    ConfigError(const std::string& what, std::string json_pointer)
        : Error(what + " [" + json_pointer + "]"), pointer(std::move(json_pointer)) {}
};

}  // namespace pmaj
