#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bicopter {

class AttitudeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Invalid scenario, parameter or command-line configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when the integrated state stops being finite. tick is -1 when the
// caller does not track ticks.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(std::int64_t tick, const std::string& what = "diverged")
        : std::runtime_error(what + " at tick " + std::to_string(tick)), tick_(tick)
    {
    }
    std::int64_t tick() const { return tick_; }

private:
    std::int64_t tick_;
};

}  // namespace bicopter
