#pragma once
//
// Two solutions driven by one noise path, integrated as (reference, difference).
//
// With `control` set, the λ-term of the shifted process on modes 1..band is
// evaluated at the reference instead of at the shifted state. That is exactly
// the solution driven by W + ∫w with w_k = -(λ/2) α_k Y_k / √b_k, and the
// Girsanov log-weight G = Σ (w·Δβ - ½|w|² dt) is accumulated on the same
// increments (left-point rule).

#include <cstdint>
#include <functional>
#include <vector>

#include "chc/dynamics.hpp"

namespace chc::detail {

struct PairOptions {
    bool record_trajectories = false;
    bool control = false;
    std::size_t band = 0;
    /// Called after every completed step with (step index, t, reference, difference).
    std::function<void(std::size_t, double, const ModeVector&, const ModeVector&)> on_step;
};

struct PairRun {
    Trajectory reference;  // X(t, y, W)
    Trajectory shifted;    // X(t, x, W) or X(t, x, W + ∫w)
    std::vector<double> times;
    std::vector<double> distance;             // |Y(t)|_{-1}
    std::vector<double> control_norm;         // |w(t)|
    std::vector<double> control_sq_integral;  // ∫_0^t |w|² ds
    std::vector<double> log_weight;           // G(t)
    ModeVector final_reference;
    ModeVector final_difference;
    std::size_t refinements = 0;
};

PairRun run_pair(const ModeVector& y0, const ModeVector& d0, const SimConfig& cfg, std::uint64_t replica,
                 const PairOptions& opts);

/// w_k = -(λ/2) α_k Y_k / √b_k for k = 1..band, zero elsewhere.
void control_modes(std::span<const double> diff, const CovarianceSpec& cov, double lambda, std::size_t band,
                   std::span<double> out);

}  // namespace chc::detail
