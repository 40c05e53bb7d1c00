#pragma once

#include <stdexcept>
#include <string>

namespace rankda {

/// Base class for the failures the command-line front end maps to exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (exit code 2).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed input data (exit code 3).
class DataError : public Error {
public:
  using Error::Error;
};

/// A numerical routine failed to reach its tolerance (exit code 4).
class NumericalError : public Error {
public:
  using Error::Error;
};

}  // namespace rankda
