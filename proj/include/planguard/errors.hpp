#pragma once

#include <stdexcept>
#include <string>

namespace planguard {

// Configuration and usage problems: bad field values, malformed files,
// unknown keys. CLI maps these to exit code 1.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Caller misuse of an operation (stepping a terminal state, empty budgets,
// out-of-range cells). Distinct from ConfigError so tests can tell a bad
// file from a bad call.
class UsageError : public std::logic_error {
  public:
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// Action outside its declared space.
class BoundsError : public UsageError {
  public:
    explicit BoundsError(const std::string& what) : UsageError(what) {}
};

// Anomaly validation cannot proceed: reference spread is zero.
class DegenerateReferenceError : public std::runtime_error {
  public:
    explicit DegenerateReferenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace planguard
