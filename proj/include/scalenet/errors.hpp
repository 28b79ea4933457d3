#pragma once

#include <stdexcept>
#include <string>

namespace scalenet {

// Raised on non-finite or structurally inconsistent inputs.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// a + b >= 0 in a Halanay-type inequality: no exponential envelope exists.
class NoContraction : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A delayed lookup asked for a time before -tau0.
class HistoryUnderflow : public std::out_of_range {
 public:
  HistoryUnderflow(const std::string& what, double time)
      : std::out_of_range(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

// The integrated state became non-finite or exceeded the divergence limit.
class Divergence : public std::runtime_error {
 public:
  Divergence(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Scenario configuration rejected by schema validation. `pointer` is a JSON
// pointer to the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message), pointer_(pointer) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace scalenet
