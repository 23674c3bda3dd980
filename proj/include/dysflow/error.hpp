#pragma once

#include <stdexcept>
#include <string>

namespace dysflow {

// Bad user input: missing files, malformed flags, impossible requests.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad data: unreadable audio, malformed labels, corrupt feature files.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed binary container (wrong magic, truncation, overflow).
struct FormatError : DataError {
    explicit FormatError(const std::string& msg) : DataError(msg) {}
};

}  // namespace dysflow
