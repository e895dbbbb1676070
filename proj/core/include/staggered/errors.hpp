#pragma once

#include <stdexcept>
#include <string>

namespace staggered {

// Structural or input problem: malformed CSV, unbalanced panel, estimand
// touching pairs that cannot be estimated. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: singular adjustment variance, negative variance beyond
// rounding noise. The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace staggered
