#pragma once

#include <stdexcept>
#include <string>

namespace dipnoise {

// Bad input: malformed config, violated precondition, unknown preset.
// The CLI maps this family (and std::invalid_argument) to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// A computation that could not produce a trustworthy number
// (non-finite sums, failed factorization, too much clipped spectrum).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace dipnoise
