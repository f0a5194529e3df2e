#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace atnf {

/// Raised when tensor shapes or argument values violate an operation's contract.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces or receives non-finite values.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised on API misuse (backward without a tape, missing gradients, ...).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised on malformed files and failed I/O.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    s += ")";
    return s;
}

}  // namespace atnf
