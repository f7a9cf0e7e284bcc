#pragma once

#include <stdexcept>
#include <string>

namespace mvdiag {

// Malformed or inconsistent input data (files, schemas, labels).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training failed to make progress (non-finite loss or gradients).
class TrainError : public std::runtime_error {
public:
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mvdiag
