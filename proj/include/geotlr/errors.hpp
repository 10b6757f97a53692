#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geotlr {

/// Bad user input: malformed files, dimension mismatches, invalid parameters.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical kernel could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the Cholesky kernels when a pivot is non-positive.
class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(std::size_t tile, std::size_t pivot, const std::string& context = {})
      : NumericalError("matrix is not positive definite (tile " + std::to_string(tile) + ", pivot " +
                       std::to_string(pivot) + ")" + (context.empty() ? "" : " " + context) +
                       "; consider adding a nugget"),
        tile_(tile),
        pivot_(pivot) {}

  std::size_t tile() const noexcept { return tile_; }
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t tile_;
  std::size_t pivot_;
};

class CompressionFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace geotlr
