#pragma once

#include <stdexcept>
#include <string>

namespace gaitma {

/// Bad user input: invalid flag values, violated preconditions.
class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Filesystem failures: missing files, unwritable directories.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed on-disk data: bad magic, truncated payload, schema mismatch.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated numeric contract: non-finite values, failed gradient check.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gaitma
