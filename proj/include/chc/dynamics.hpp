#pragma once
//
// Spectral Galerkin integration of
//
//   dX + ½(A²X + A f_n(X)) dt = √B dW,   X(0) = x,
//
// in mode space. Per mode k ≥ 1 (with -A e_k = α_k e_k):
//
//   x_k⁺ = (x_k + (dt/2) α_k [f_n(X)]_k + ΔW_k) / (1 + (dt/2) α_k²)
//
// The bi-Laplacian is implicit, the nonlinearity explicit (evaluated on the
// quadrature grid), and mode 0 never changes.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chc/noise.hpp"
#include "chc/potential.hpp"
#include "chc/rng.hpp"
#include "chc/spectral.hpp"

namespace chc {

struct SimConfig {
    std::size_t M = 32;
    /// Quadrature size; 0 selects 4(M+1)·oversample.
    std::size_t Q = 0;
    std::size_t oversample = 1;
    double dt = 1e-4;
    double T = 1.0;
    double c = 0.0;
    PotentialSpec potential = PotentialSpec::truncated(1.0, 4);
    CovarianceSpec cov;
    std::uint64_t seed = 0;
    double sup_guard = 1.5;
    std::size_t save_every = 1;
    int max_halvings = 10;
    bool keep_states = false;
    /// Also accumulate 2∫∫(∂θX)² Σ X^{2k} (costs one more transform per step).
    bool track_gradient_functional = false;

    std::size_t grid_size() const;
    /// ⌈T/dt⌉.
    std::size_t steps() const;
    void validate() const;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<ModeVector> states;  // only with keep_states

    // Observables at each saved time.
    std::vector<double> mean;
    std::vector<double> norm_m1;
    std::vector<double> norm_1;
    std::vector<double> sup;
    std::vector<double> energy;

    ModeVector initial;
    ModeVector final_state;

    // Per-step accumulators (trapezoid for the dissipations, left point for martingales).
    double dissipation_1 = 0.0;        // ∫|X|_1² dt
    double dissipation_2 = 0.0;        // ∫|X|_2² dt
    double martingale_m1 = 0.0;        // 2∫(X, √B dW)_{-1}
    double martingale_0 = 0.0;         // 2∫⟨X, √B dW⟩ on modes ≥ 1
    double gradient_functional = 0.0;  // 2∫∫(∂θX)² Σ X^{2k}
    double min_gradient_integrand = 0.0;
    std::size_t refinements = 0;       // number of halved steps

    /// Named observable series: t, mean, norm_m1, norm_1, sup, energy.
    const std::vector<double>& series(const std::string& name) const;
};

/// Grid-level evaluation of the nonlinearity and the pair difference.
class NonlinearTerm {
public:
    explicit NonlinearTerm(const PotentialSpec& spec) : spec_(spec) {}

    const PotentialSpec& spec() const noexcept { return spec_; }

    /// out[q] = f(u[q]).
    void evaluate(std::span<const double> u, std::span<double> out) const;
    /// out[q] = p(u[q] + d[q]) - p(u[q]), p = f - λ·id, without cancellation.
    void difference(std::span<const double> u, std::span<const double> d, std::span<double> out) const;
    /// Σ_{k} u^{2k} weight of the gradient functional.
    double gradient_weight(double u) const;
    /// Whether a state with this grid sup-norm may be stepped.
    bool admissible(double sup_norm, double guard) const;

private:
    PotentialSpec spec_;
};

/// Deterministic core of one step; shared by single, pair and coupled integrators.
class Stepper {
public:
    explicit Stepper(const SimConfig& cfg);

    const SimConfig& config() const noexcept { return cfg_; }
    const CosineBasis& basis() const noexcept { return basis_; }
    const NonlinearTerm& nonlinear() const noexcept { return nonlinear_; }
    std::size_t modes() const noexcept { return cfg_.M + 1; }
    bool linear() const noexcept { return cfg_.potential.is_disabled(); }

    /// [f(X)]_k from the grid samples of X.
    void nonlinear_modes(std::span<const double> grid, std::span<double> out) const;
    /// Semi-implicit update given precomputed [f(X)]_k.
    void update(std::span<const double> v, std::span<const double> f_modes, std::span<const double> dw,
                double dt, std::span<double> out) const;

    double gradient_functional_density(std::span<const double> v, std::span<const double> grid) const;

private:
    SimConfig cfg_;
    CosineBasis basis_;
    NonlinearTerm nonlinear_;
    mutable std::vector<double> scratch_grid_;
    mutable std::vector<double> scratch_modes_;
};

/// One step from v with a given noise increment; throws StiffEvent when the
/// grid sup-norm of v is outside the admissible band.
ModeVector step(const ModeVector& v, const ModeVector& dw, const SimConfig& cfg);
ModeVector step(const ModeVector& v, const ModeVector& dw, const SimConfig& cfg, double dt);

/// Full trajectory for replica `replica` (noise stream (cfg.seed, replica)).
Trajectory simulate(const ModeVector& x0, const SimConfig& cfg, std::uint64_t replica = 0);

struct PairResult {
    Trajectory x;
    Trajectory y;
    std::vector<double> times;
    std::vector<double> distance;  // |X(t,x) - X(t,y)|_{-1}
};

/// Two solutions driven by the identical noise realization.
PairResult simulate_pair(const ModeVector& x0, const ModeVector& y0, const SimConfig& cfg,
                         std::uint64_t replica = 0);

/// |·|_{-1}-level Itô budget: |X(T)|² - |x|² + ∫|X|_1² ≤ 2∫(X,√BdW) + T Q_c(λ).
EnergyBudget ito_budget_m1(const Trajectory& traj, const SimConfig& cfg);
/// |·|_0-level budget: ∫|X|_2² ≤ |x|_0² + T Tr_0 (+ martingale), with the gradient functional.
EnergyBudget ito_budget_0(const Trajectory& traj, const SimConfig& cfg);

/// Constant Q_c(λ) = Tr_{-1} + P_c(λ) for this configuration (Tr_{-1} alone when
/// the potential is disabled).
double budget_constant(const SimConfig& cfg);

/// Mean ± standard error accumulator.
struct SampleStat {
    double mean = 0.0;
    double se = 0.0;
    std::size_t count = 0;

    static SampleStat of(std::span<const double> samples);
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
/// handled exactly once; callers write results into per-index slots.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Thread count from CHC_THREADS, falling back to hardware concurrency.
std::size_t default_thread_count();

}  // namespace chc
