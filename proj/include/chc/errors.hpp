#pragma once

#include <stdexcept>
#include <string>

namespace chc {

/// Grid sup-norm left the admissible band (or became non-finite) during a step.
class StiffEvent : public std::runtime_error {
public:
    StiffEvent(const std::string& what, double time, double sup_norm)
        : std::runtime_error(what), time_(time), sup_norm_(sup_norm) {}

    double time() const noexcept { return time_; }
    double sup_norm() const noexcept { return sup_norm_; }

private:
    double time_;
    double sup_norm_;
};

/// The exact logarithmic nonlinearity was evaluated outside (-1, 1).
class SingularInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Spectral gap of the uncontrolled block is too small for contraction.
class BandTooSmall : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace chc
