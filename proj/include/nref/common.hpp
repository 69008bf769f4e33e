#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nref {

using NodeId = std::uint32_t;
using Index = std::uint64_t;

// Error categories map onto CLI exit codes (1 usage, 2 data, 3 numeric).
class UsageError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace nref
