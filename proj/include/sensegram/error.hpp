#pragma once

#include <stdexcept>
#include <string>

namespace sensegram {

/// Malformed input data or an I/O failure. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments supplied by the caller. The CLI maps this to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sensegram
