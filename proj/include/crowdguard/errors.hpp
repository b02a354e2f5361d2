#pragma once

#include <stdexcept>
#include <string>

namespace crowdguard {

// Bad experiment setup: shapes, hyperparameter ranges, infeasible splits.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad data: unparseable files, out-of-range labels.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A metric whose denominator is empty.
struct UndefinedMetricError : std::runtime_error {
    explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace crowdguard
