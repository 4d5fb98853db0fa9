#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aevb {

/// Operand shapes do not fit the primitive's signature.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain (log of a non-positive value,
/// support violations of a density, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Misuse of the autodiff tape: non-scalar loss, detached graph, foreign node.
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input files or configuration.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace aevb
