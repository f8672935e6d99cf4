#pragma once
//
// Coupling by a low-mode control.
//
// X̃ solves the equation driven by W + ∫w, with w chosen so that the
// destabilizing λ-term on modes 1..N is evaluated at X(t, y) instead of at X̃.
// Y = X̃ - X(t, y) then contracts at rate
//
//   δ = (α_1/2) min{α_1, α_{N+1} - λ},
//
// and the Girsanov weight e^{G}, G = ∫w·dβ - ½∫|w|², measures how far the law
// of X̃ is from the law of X(t, x).

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "chc/dynamics.hpp"

namespace chc {

struct DeltaRate {
    /// 2π min{½(N+1)² - λ, 1}, the rate in its stated form.
    double stated_delta = 0.0;
    /// (α_1/2) min{α_1, α_{N+1} - λ}, the rate of the integrated equation.
    double impl_delta = 0.0;
    /// ½(N+1)² - λ > 0.
    bool stated_condition = false;
};

/// Throws BandTooSmall unless α_{N+1} > λ.
DeltaRate delta_rate(std::size_t band, double lambda);

/// |w| ≤ κ |Y|_{-1} with κ = (|λ|/2) max_{k≤N} α_k^{3/2}/√b_k.
double kappa(const CovarianceSpec& cov, double lambda, std::size_t band);
/// |w| ≤ κ_0 |π_l Y|_0 with κ_0 = (|λ|/2) max_{k≤N} α_k/√b_k.
double control_gain_l2(const CovarianceSpec& cov, double lambda, std::size_t band);

/// w_k = -(λ/2) α_k Y_k / √b_k for k = 1..N, zero elsewhere.
ModeVector control(const ModeVector& y, const CovarianceSpec& cov, double lambda, std::size_t band);

/// C(r) = κ/√(2δ) · exp(κ² r² / (2δ)).
double girsanov_constant(double kappa, double delta, double r);

struct CouplingRecord {
    std::vector<double> times;
    std::vector<double> dist_m1;
    std::vector<double> control_norm;
    std::vector<double> control_sq_integral;
    std::vector<double> log_weight;
    double terminal_weight = 1.0;
    std::size_t refinements = 0;

    /// Largest dist_m1(t) / (e^{-δt} dist_m1(0)) along the path (0 when dist_m1(0) = 0).
    double max_contraction_ratio(double delta) const;
    /// Largest |w(t)| / (κ e^{-δt} dist_m1(0)).
    double max_control_ratio(double kappa, double delta) const;
};

/// X̃ from x0 and X(·, y0) on one noise path (replica stream of cfg.seed).
CouplingRecord simulate_coupled(const ModeVector& x0, const ModeVector& y0, const SimConfig& cfg,
                                std::size_t band, std::uint64_t replica = 0);

/// -slope of the least-squares line through (t, ln d) for t ≤ t_max, d > 0.
double fitted_decay_rate(std::span<const double> times, std::span<const double> dist, double t_max);

struct GirsanovGap {
    SampleStat gap;     // E|1 - e^{G(T)}|
    SampleStat weight;  // E e^{G(T)}
    double bound = 0.0; // C(|x|_{-1} ∨ |y|_{-1}) |x - y|_{-1}
    double kappa = 0.0;
    double delta = 0.0;
    double distance = 0.0;
};

GirsanovGap girsanov_gap(const ModeVector& x0, const ModeVector& y0, const SimConfig& cfg, std::size_t band,
                         std::size_t replicas, std::size_t threads = 1);

struct BoundedLipschitz {
    std::function<double(const ModeVector&)> fn;
    double sup = 1.0;
    /// Lipschitz constant with respect to |·|_{-1}.
    double lip = 1.0;
};

struct AsfEstimate {
    double t = 0.0;
    double lhs = 0.0;
    double lhs_se = 0.0;
    double bound = 0.0;
};

/// |E φ(X(t, x)) - E φ(X(t, y))| with common noise, against
/// (C |φ|_∞ + e^{-δt} |∇φ|_∞) |x - y|_{-1}. Each t must be a multiple of cfg.dt.
std::vector<AsfEstimate> asf_estimate(const BoundedLipschitz& phi, const ModeVector& x0, const ModeVector& y0,
                                      std::span<const double> t_list, const SimConfig& cfg, std::size_t band,
                                      std::size_t replicas, std::size_t threads = 1);

}  // namespace chc
