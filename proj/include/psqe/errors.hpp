#pragma once

#include <stdexcept>
#include <string>

namespace psqe {

/// Malformed or inconsistent input data (files, matrices, graphs).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration values or combinations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace psqe
