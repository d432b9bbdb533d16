#pragma once

#include <stdexcept>
#include <string>

namespace pauie {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two operands disagree, or a size violates a divisibility rule.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A scalar or count parameter is outside its documented range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Input data violates a domain invariant (e.g. negative depth).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A statistic is mathematically undefined for the given data.
class UndefinedError : public Error {
 public:
  using Error::Error;
};

// Run configuration is invalid; reported before any output is written.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File could not be read, decoded, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pauie
