#pragma once
//
// Logarithmic nonlinearity and its odd polynomial truncations.
//
//   f(u)   = ln((1-u)/(1+u)) + λu                       on (-1, 1)
//   f_n(u) = -2 Σ_{k=0}^{n} u^{2k+1}/(2k+1) + λu        on ℝ
//   F(u)   = (1+u)ln(1+u) + (1-u)ln(1-u) - λu²/2        (F' = -f)
//   F_n(u) = Σ_{k=0}^{n} u^{2k+2}/((2k+1)(k+1)) - λu²/2 (F_n' = -f_n)
//
// p_n(u) = f_n(u) - λu is non-increasing; that sign property drives every
// contraction estimate downstream.

#include <cstddef>
#include <utility>

#include "chc/spectral.hpp"

namespace chc {

struct PotentialSpec {
    enum class Order { Exact, Truncated, Disabled };

    double lambda = 0.0;
    Order order = Order::Truncated;
    int n = 0;

    static PotentialSpec exact(double lambda) { return {lambda, Order::Exact, 0}; }
    static PotentialSpec truncated(double lambda, int n) { return {lambda, Order::Truncated, n}; }
    /// No nonlinearity at all: f ≡ 0, the equation is linear (λ is ignored).
    static PotentialSpec disabled() { return {0.0, Order::Disabled, 0}; }

    bool is_disabled() const noexcept { return order == Order::Disabled; }
    void validate() const;

    friend bool operator==(const PotentialSpec&, const PotentialSpec&) = default;
};

/// Budget of Itô-formula terms for one trajectory (|·|_{-1} or |·|_0 level).
struct EnergyBudget {
    double terminal_seminorm_sq = 0.0;
    double initial_seminorm_sq = 0.0;
    double dissipation = 0.0;
    double bound = 0.0;
    double martingale = 0.0;
    /// 2∫∫ (∂θX)² Σ_{k≤n} X^{2k}; only populated at the |·|_0 level.
    double gradient_functional = 0.0;

    /// terminal - initial + dissipation.
    double lhs() const { return terminal_seminorm_sq - initial_seminorm_sq + dissipation; }
};

/// Exact nonlinearity; returns +∞ for u ≤ -1 and -∞ for u ≥ 1.
double f_exact(double u, double lambda);
bool is_singular(double f_value);

/// Truncated nonlinearity f_n (requires spec.order == Truncated).
double f_poly(double u, const PotentialSpec& spec);
/// f, f_n or 0 depending on spec.order.
double f_value(double u, const PotentialSpec& spec);

/// (p_n(u + d) - p_n(u)) / d evaluated without cancellation; p_n'(u) when d = 0.
double p_divided_difference(double u, double d, int n);

/// Σ_{k=0}^{n} u^{2k}, the factor of (∂θX)² in the |·|_0 Itô budget.
double even_power_sum(double u, int n);

/// F(u; λ) on [-1, 1]; closure value 2ln2 - λ/2 at ±1.
double F_value(double u, double lambda);
/// Term-wise antiderivative of -f_n.
double F_poly(double u, const PotentialSpec& spec);
/// Potential density matching spec.order (0 when disabled).
double potential_density(double u, const PotentialSpec& spec);

/// ½|v|_1² + ∫ F(u) dθ by midpoint quadrature on grid_size nodes
/// (grid_size = 0 selects the default 4(M+1)).
double free_energy(const ModeVector& v, const PotentialSpec& spec, std::size_t grid_size = 0);

struct SeriesOptions {
    /// Stop once the geometric majorant of the remainder is below tol.
    double tol = 1e-17;
    int max_terms = 10000;
};

/// P_c(λ) = (3/2)(1-λ)² - c²λ + F(c; 0).
double P_c(double lambda, double c);
/// Q_c(λ) = Tr_{-1} + P_c(λ).
double Q_c(double lambda, double c, double trace_m1);
/// (λ*, P_c(λ*)) with λ* = c²/3 + 1; the minimum value is summed as a series.
std::pair<double, double> lambda_star(double c, SeriesOptions opts = {});
/// -12 Σ_{k≥2} c^{2k+2}/((2k+1)(2k+2)), summed until the term drops below tol.
double discriminant(double c, SeriesOptions opts = {});

/// 2 Σ_{k>n} r^{2k+1}/(2k+1): bound on sup_{|u|≤r} |f_n(u) - f(u)|.
double truncation_tail_bound(double r, int n, SeriesOptions opts = {});

}  // namespace chc
