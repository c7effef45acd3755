#pragma once

#include <stdexcept>
#include <string>

namespace ropesim {

/// Runtime failure inside the simulator or an optimization driver.
struct SimError : std::runtime_error {
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or input file; distinct from runtime failures so the
/// CLI can map it to its own exit code.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ropesim
