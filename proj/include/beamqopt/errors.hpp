#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace beamqopt {

/// Invalid user-facing configuration (generator profile, mixer spec, flags).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside an operation's mathematical domain (unknown ids, size
/// mismatches, non-positive factors).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Problem too large for the dense statevector or brute-force paths.
class CapacityError : public std::length_error {
public:
  CapacityError(std::size_t requested, std::size_t cap, const std::string &what)
      : std::length_error(what + ": " + std::to_string(requested) +
                          " qubits requested, cap is " + std::to_string(cap)),
        requested_(requested), cap_(cap) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t cap() const noexcept { return cap_; }

private:
  std::size_t requested_;
  std::size_t cap_;
};

} // namespace beamqopt
