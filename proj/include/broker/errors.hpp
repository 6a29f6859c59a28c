#pragma once

#include <stdexcept>
#include <string>

namespace broker {

// Invalid scenario or module configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (trace files, series).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Broken internal invariant, e.g. a double bind. Signals a scheduler bug.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace broker
