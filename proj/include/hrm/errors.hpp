#pragma once

#include <stdexcept>
#include <string>

namespace hrm {

/// Malformed grid text or a grid whose cells violate the token range.
class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two operands whose dimensions do not line up (grids, transforms, tensors).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Puzzle generation ran out of retries before reaching the clue target.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NaN or Inf surfaced in a tensor value or loss.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File or stream failure; the message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hrm
