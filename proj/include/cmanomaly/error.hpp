#pragma once

#include <stdexcept>
#include <string>

namespace cmanomaly {

// Bad input: malformed files, shape mismatches, invalid options. Maps to CLI exit code 2.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure while running: divergence, non-finite values. Maps to CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cmanomaly
