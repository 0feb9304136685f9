#pragma once

#include <stdexcept>
#include <string>

namespace nire {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BroadcastError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values showed up where the math says they cannot.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated binary/text file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace nire
