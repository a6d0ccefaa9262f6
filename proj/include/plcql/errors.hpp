#pragma once

#include <stdexcept>
#include <string>

namespace plcql {

// Bad configuration (unknown key, range violation). CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File I/O, checksum, or format-version failures. CLI maps this to exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace plcql
