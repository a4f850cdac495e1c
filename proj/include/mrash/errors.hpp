#ifndef MRASH_ERRORS_HPP
#define MRASH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mrash {

// Malformed input files or option strings.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension / shape mismatches between inputs.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid simulation scenario configuration.
struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mrash

#endif
