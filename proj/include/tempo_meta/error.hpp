#pragma once

#include <stdexcept>
#include <string>

namespace tempo_meta {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (quadruple files, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Ids or values outside their permitted range.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Mismatched parameter / gate dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A loss or gradient became NaN or infinite.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace tempo_meta
