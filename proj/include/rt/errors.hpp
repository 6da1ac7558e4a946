#pragma once

#include <stdexcept>
#include <string>

namespace rt {

// Shape/state violations of a module contract.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& m) : std::runtime_error(m) {}
};

// Bad configuration (invalid level sets, schema violations, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

// Bad call arguments (out-of-range strength, lambda, ...).
struct ArgumentError : std::invalid_argument {
    explicit ArgumentError(const std::string& m) : std::invalid_argument(m) {}
};

// Filesystem problems (unreadable image, corrupt manifest, ...).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace rt
