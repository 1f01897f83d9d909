#pragma once

#include <stdexcept>
#include <string>

namespace labelforge {

/// Precondition violated by a caller-supplied value.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Value not representable in the target encoding.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Bad run configuration, scene file or manifest.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace labelforge
