#pragma once

#include <stdexcept>
#include <string>

namespace dcal {

// Input outside an operation's domain (empty batch, outcome outside the
// kernel domain, malformed parameters).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Objects that cannot be combined (kernel mismatch) or a configuration
// document that does not validate. `key()` names the offending entry when
// there is one.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : std::runtime_error(what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace dcal
