#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pelab {

/// Violated precondition or malformed model input (bad shapes, invalid
/// probabilities, out-of-range hyperparameters).
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

/// The D-weighted feature Gram matrix is singular or too ill-conditioned to
/// invert. Carries the offending condition number.
class DegenerateFeatures : public std::runtime_error {
public:
    DegenerateFeatures(const std::string& what, double condition_number)
        : std::runtime_error(what), condition(condition_number) {}
    double condition;
};

/// Parameter norms beyond this (or any non-finite entry) count as divergence;
/// it converts silent blow-up into a test-observable event.
inline constexpr double default_divergence_threshold = 1e8;

/// An online learner blew up: a parameter vector went non-finite or exceeded
/// the divergence threshold. Carries the step index at which it happened.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::uint64_t at_step)
        : std::runtime_error(what), step(at_step) {}
    std::uint64_t step;
};

/// Malformed configuration or scenario file. Keeps the key path (and file
/// position when known) so the CLI can point at the offending entry.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, std::string key_path = {},
                         int line = 0, int column = 0)
        : std::runtime_error(what), key(std::move(key_path)), line(line), column(column) {}
    std::string key;
    int line;
    int column;
};

}  // namespace pelab
