#pragma once

#include <stdexcept>
#include <string>

namespace odmn {

// Shape mismatches between tensors/layers.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bad configuration values (rejected before any work starts).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed input data (files, rows, labels).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API called in the wrong order (e.g. backward without a recorded tape).
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

// A metric is undefined on the given inputs (e.g. mean(y) == 0).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace odmn
