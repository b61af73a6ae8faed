#pragma once

#include <stdexcept>
#include <string>

namespace npmd {

// Bad shapes, bad ranges, malformed files. CLI maps this to exit code 1.
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values, failed numerical checks. CLI maps this to exit code 2.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace npmd
