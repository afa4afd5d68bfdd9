#pragma once

#include <stdexcept>
#include <string>

namespace binpercept {

/// Malformed or missing input data (files, dimensions, records).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values or unknown config keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A result violated an invariant the library promises to uphold.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace binpercept
