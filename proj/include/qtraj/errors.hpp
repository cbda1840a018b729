// errors.hpp — exception types shared across the library
#pragma once

#include <stdexcept>
#include <string>

namespace qtraj {

// Malformed config text (grammar level). Carries a line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Semantically invalid parameters or requests (bad cutoffs, non-power-of-two
// grids, dimension mismatches, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid composite wiring detected while building a Composite.
class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Attempt to normalize (or jump into) a numerically zero state.
class DegenerateStateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ODE step size collapsed below the representable scale.
class StiffnessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Total jump probability of a completed step reached O(1); the step size
// control is misconfigured for the system at hand.
class StepSizeFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace qtraj
