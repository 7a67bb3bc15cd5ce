#ifndef NTFK_ERRORS_HPP
#define NTFK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ntfk {

// Bad user input: configs, shapes, file headers. CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A solver failed to reach its tolerance. CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ntfk

#endif  // NTFK_ERRORS_HPP
