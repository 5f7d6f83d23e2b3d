#pragma once

#include <stdexcept>
#include <string>

namespace tagmine {

// Bad flags, out-of-range knobs, violated operation preconditions. CLI exit 1.
class UsageError : public std::invalid_argument {
public:
    explicit UsageError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Unreadable files, malformed records, dimension mismatches in data. CLI exit 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tagmine
