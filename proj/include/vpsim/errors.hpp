#pragma once

#include <stdexcept>
#include <string>

namespace vpsim {

// Bad user input: malformed config, unknown keys, violated parameter constraints.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown: quadrature failure, non-finite state, collisions at eps = 0.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vpsim
