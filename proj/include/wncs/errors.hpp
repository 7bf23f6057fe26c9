#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wncs {

/// Invalid configuration or dimension mismatch.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Aggregated validation failure; every violation is kept.
class ValidationError : public ConfigError {
public:
    explicit ValidationError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// A plant state left the finite / guarded regime.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A node transmitted outside its slot.
class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A caller broke an operation precondition (scheduler or runner bug).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Controller synthesis failed (Riccati divergence, unstabilizable pair).
class SynthesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative numerics failed to converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Control demand exceeds the slots of a round.
class OverloadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No static schedule satisfies the flows of a scenario.
class InfeasibleScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace wncs
