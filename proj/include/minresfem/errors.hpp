#pragma once

#include <stdexcept>
#include <string>

namespace minresfem {

// Bad or unsupported input: malformed config files, out-of-range parameters,
// invalid marker sets. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A request outside what the library implements (unsupported family/degree
// combination, missing data for an operation). Maps to CLI exit code 1.
class CapabilityError : public std::logic_error {
 public:
  explicit CapabilityError(const std::string& what) : std::logic_error(what) {}
};

// A solver, eigensolver, or factorization failed to reach its certified
// tolerance. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace minresfem
