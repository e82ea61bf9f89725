#pragma once

#include <stdexcept>
#include <string>

namespace qmix {

/// Base class for all qmix errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input files or records.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

/// Inputs that are structurally well-formed but violate a contract
/// (non-Hermitian state, non-CPTP channel, arity mismatch, ...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// Register size cap or enumeration guard exceeded.
class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& msg) : Error(msg) {}
};

/// A verification suite or residual check failed.
class VerificationError : public Error {
 public:
  explicit VerificationError(const std::string& msg) : Error(msg) {}
};

}  // namespace qmix
