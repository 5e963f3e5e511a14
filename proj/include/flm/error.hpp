#pragma once

#include <stdexcept>
#include <string>

namespace flm {

// Invalid parameters, inconsistent inputs, or a bad allocation handed to the engine.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A scenario or output file failed to parse or validate. The message names the
// file and, when known, the 1-based line.
class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& file, int line, const std::string& what)
      : std::runtime_error(file + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                           what),
        file_(file),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  std::string file_;
  int line_;
};

class RoutingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No allocation satisfies the supply constraints.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flm
