#pragma once

#include <stdexcept>
#include <string>

namespace talbot {

// Bad or inconsistent configuration input (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Grid cannot represent the requested field or kernel (CLI exit code 3).
class SamplingError : public std::runtime_error {
public:
    explicit SamplingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Lattice fit could not be performed on the given sites (CLI exit code 3).
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

// Move sequencing ran out of options, e.g. no buffer site for a cycle break
// (CLI exit code 3).
class PlanningError : public std::runtime_error {
public:
    explicit PlanningError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failed file/directory operation (CLI exit code 4).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace talbot
