#pragma once

#include <stdexcept>

namespace tcct {

// Invalid configuration value; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable or malformed input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feature set or feature count disagrees with what a model or file expects.
class FeatureMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tcct
