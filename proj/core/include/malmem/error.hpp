#pragma once

#include <stdexcept>
#include <string>

namespace malmem {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration: invalid flag values, unknown names, out-of-range parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Bad data: missing files, unparseable cells, degenerate label structure.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace malmem
