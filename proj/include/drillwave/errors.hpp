#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace drillwave {

// Raised when the normalized tracking error leaves (-1, 1).  The controller's
// guarantee is void at that point, so simulations abort loudly instead of
// clipping and carrying on with a meaningless trace.
class FunnelViolation : public std::runtime_error {
public:
    FunnelViolation(double time, double e)
        : std::runtime_error("funnel violation at t=" + std::to_string(time) +
                             ": |e|=" + std::to_string(std::abs(e)) + " >= 1"),
          time_(time), e_(e) {}

    double time() const noexcept { return time_; }
    double error_value() const noexcept { return e_; }

private:
    double time_;
    double e_;
};

// History lookups outside the covered span are programming errors (a delay
// horizon was sized wrong); we never extrapolate silently.
class DelayBufferError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration problems carry the offending field path so CLI users can fix
// their files without reading source.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Iterative solves (Newton loops, Picard iteration) that fail to reach their
// tolerance raise this; callers are expected to treat it as fatal.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace drillwave
