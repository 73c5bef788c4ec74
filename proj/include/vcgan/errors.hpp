#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace vcgan {

// Malformed request: bad flags, unknown config keys, wrong operation order.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Inputs violate a data contract: shapes, ranges, missing files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numeric failure during optimization (NaN/Inf loss).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::ostream*& warning_stream() {
    static std::ostream* stream = &std::clog;
    return stream;
}

inline void warn(const std::string& message) {
    if (auto* os = warning_stream()) {
        *os << "warning: " << message << '\n';
    }
}

}  // namespace vcgan
