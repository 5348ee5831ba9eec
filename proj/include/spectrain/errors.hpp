#pragma once

#include <stdexcept>
#include <string>

namespace spectrain {

// Raised when a matrix or activation contains NaN/Inf.
struct NonFiniteError : std::runtime_error {
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a hidden layer's activation matrix has collapsed to (near) zero,
// so its normalized spectrum is undefined. Scoring treats the run as gated.
struct DeadLayerError : std::runtime_error {
  explicit DeadLayerError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a score is requested before the spectrum window is filled.
struct WindowError : std::logic_error {
  explicit WindowError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace spectrain
