#pragma once

#include <stdexcept>
#include <string>

namespace veripc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct NumericalFailure : Error {
  using Error::Error;
};

struct EmptyInput : Error {
  using Error::Error;
};

struct EmptySet : Error {
  using Error::Error;
};

struct DimensionTooHigh : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct BadDims : Error {
  using Error::Error;
};

}  // namespace veripc
