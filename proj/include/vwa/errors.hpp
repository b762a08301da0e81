#pragma once

#include <stdexcept>
#include <string>

namespace vwa {

// Error taxonomy used across the library. Every failure mode maps to one of
// these; messages name the offending dimension or field.

struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument("shape error: " + msg) {}
};

struct GeometryError : std::invalid_argument {
    explicit GeometryError(const std::string& msg) : std::invalid_argument("geometry error: " + msg) {}
};

struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument("config error: " + msg) {}
};

struct IndexError : std::out_of_range {
    explicit IndexError(const std::string& msg) : std::out_of_range("index error: " + msg) {}
};

struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error("contract error: " + msg) {}
};

struct UnsupportedError : std::logic_error {
    explicit UnsupportedError(const std::string& msg) : std::logic_error("unsupported: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

}  // namespace vwa
