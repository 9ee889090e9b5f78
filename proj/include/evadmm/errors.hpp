#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evadmm {

/// Invalid argument outside an operation's domain (negative volume, bad index, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A price curve could not be fitted.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text input (CSV, config) rejected. `line()` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Scenario configuration violates its schema. `field()` is a JSON pointer.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/**
 * @brief The constraint polytope is empty.
 *
 * `hour()` is the first cumulative index at which the lower and upper
 * requirement envelopes cannot both be met.
 */
class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(const std::string& what, int hour)
        : std::runtime_error(what), hour_(hour) {}
    int hour() const noexcept { return hour_; }

private:
    int hour_;
};

/// Numerical solver did not reach its tolerance; carries the best iterate found.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::vector<double> best, double residual, int agent = -1)
        : std::runtime_error(what), best_(std::move(best)), residual_(residual), agent_(agent) {}
    const std::vector<double>& best_iterate() const noexcept { return best_; }
    double residual() const noexcept { return residual_; }
    /// Agent whose local update failed, -1 for centralized solves.
    int agent() const noexcept { return agent_; }

private:
    std::vector<double> best_;
    double residual_;
    int agent_;
};

}  // namespace evadmm
