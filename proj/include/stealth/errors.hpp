#pragma once

#include <stdexcept>
#include <string>

namespace stealth {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract arguments.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A linear solve or iteration failed to produce a trustworthy result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Chain structure does not admit the requested object (e.g. several
/// closed classes, so no unique stationary distribution).
class StructureError : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain where a bound or recursion is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

[[noreturn]] void throw_invalid(const std::string& what);

}  // namespace stealth
