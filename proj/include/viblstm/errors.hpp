#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace viblstm {

/// Shape or size disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-finite value where a finite one is required (loss blow-up, bad input).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed container or dataset file. Carries the byte offset of the fault.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

/// A prune plan that would leave no features or no hidden units.
class DegeneratePlanError : public std::runtime_error {
 public:
  explicit DegeneratePlanError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace viblstm
