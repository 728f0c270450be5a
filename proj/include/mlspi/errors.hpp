#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlspi {

/// Invalid state, action, parameter or matrix entry.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Fewer samples than feature functions.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every eigenvalue of the Gram matrix is numerically zero.
class DegenerateFeatures : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Enumerated state space would exceed the configured cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver hit its iteration limit.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weight iterates blew up. `iteration()` is the outer training iteration
/// when known, otherwise the inner evaluation step.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration)
      : std::runtime_error(what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace mlspi
