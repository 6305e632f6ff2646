#pragma once

#include <stdexcept>
#include <string>

namespace textclf {

// Bad or missing input: files, datasets, malformed records, invalid config
// values. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible artifacts: checkpoint version/shape mismatch, vocabulary
// mismatch, architecture excluded from a protocol. CLI exit code 3.
class CompatError : public std::runtime_error {
 public:
  explicit CompatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure: NaN/Inf in a forward pass or gradient, failed gradient
// verification. CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace textclf
