#ifndef IDVO_ERRORS_HPP
#define IDVO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace idvo {

// Argument outside the mathematical domain of an operation (negative depth, negative speed).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Point at or behind the camera plane.
class BehindCameraError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Incompatible image/grid shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Sequence too short for the requested operation.
class LengthError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Malformed text input. what() names the source and line when known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unsupported binary file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing files or inconsistent dataset layout.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during evaluation/optimization.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace idvo

#endif  // IDVO_ERRORS_HPP
