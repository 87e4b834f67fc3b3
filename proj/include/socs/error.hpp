#pragma once

#include <stdexcept>
#include <string>

namespace socs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A data structure violated one of its invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported container file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Scene simulation could not produce the requested data.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace socs
