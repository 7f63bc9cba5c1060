#pragma once

#include <stdexcept>
#include <string>

namespace avatar {

// Bad user-supplied data: unreadable files, malformed manifests, empty input.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration: out-of-range option values, missing resources.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated API precondition; indicates a bug in the caller.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace avatar
