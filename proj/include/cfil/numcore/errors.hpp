#pragma once

#include <stdexcept>
#include <string>

namespace cfil {

// Shape disagreement between tensors or network layers.
struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Bad argument value (negative counts, unknown tags, degenerate ranges).
struct ArgumentError : std::invalid_argument {
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// A numeric primitive produced or received a non-finite value. The message
// names the offending primitive.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Operation called on an object in the wrong state (e.g. empty buffer).
struct StateError : std::runtime_error {
  explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cfil
