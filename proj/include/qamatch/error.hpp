#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qamatch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A hyperparameter or argument lies outside its valid domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent dataset, sidecar, config or report file.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Binary model file failed its format contract (magic, dims, length).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (e.g. empty confusion matrix).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Non-finite gradient or loss during optimization.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace qamatch
