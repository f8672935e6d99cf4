#include "chc/potential.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "chc/errors.hpp"

namespace chc {

void PotentialSpec::validate() const {
    if (!std::isfinite(lambda)) throw std::invalid_argument("potential: lambda must be finite");
    if (order == Order::Truncated && n < 0)
        throw std::invalid_argument("potential: truncation order n must be >= 0");
}

double f_exact(double u, double lambda) {
    if (u <= -1.0) return std::numeric_limits<double>::infinity();
    if (u >= 1.0) return -std::numeric_limits<double>::infinity();
    // ln((1-u)/(1+u)) = log1p(-u) - log1p(u).
    return std::log1p(-u) - std::log1p(u) + lambda * u;
}

bool is_singular(double f_value) { return std::isinf(f_value); }

double f_poly(double u, const PotentialSpec& spec) {
    if (spec.order != PotentialSpec::Order::Truncated)
        throw std::invalid_argument("f_poly requires a truncated potential");
    const double u2 = u * u;
    double acc = 0.0;
    for (int k = spec.n; k >= 0; --k) acc = acc * u2 + 1.0 / (2.0 * k + 1.0);
    return -2.0 * u * acc + spec.lambda * u;
}

double f_value(double u, const PotentialSpec& spec) {
    switch (spec.order) {
        case PotentialSpec::Order::Exact: return f_exact(u, spec.lambda);
        case PotentialSpec::Order::Truncated: return f_poly(u, spec);
        case PotentialSpec::Order::Disabled: return 0.0;
    }
    return 0.0;
}

double p_divided_difference(double u, double d, int n) {
    // S_m = Σ_{j<m} a^j b^{m-1-j} = (a^m - b^m)/(a - b), built by S_{m+1} = a S_m + b^m.
    const double a = u + d;
    const double b = u;
    double s = 1.0;       // S_1
    double b_pow = b;     // b^1
    double acc = 1.0;     // k = 0 term: S_1 / 1
    for (int m = 1; m < 2 * n + 1; ++m) {
        s = a * s + b_pow;
        b_pow *= b;
        const int next = m + 1;
        if (next % 2 == 1) acc += s / static_cast<double>(next);
    }
    return -2.0 * acc;
}

double even_power_sum(double u, int n) {
    const double u2 = u * u;
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) acc = acc * u2 + 1.0;
    return acc;
}

double F_value(double u, double lambda) {
    if (std::abs(u) > 1.0)
        throw std::invalid_argument("F_value: |u| = " + std::to_string(std::abs(u)) + " > 1");
    if (std::abs(u) == 1.0) return 2.0 * std::log(2.0) - 0.5 * lambda;
    const double ent = (1.0 + u) * std::log1p(u) + (1.0 - u) * std::log1p(-u);
    return ent - 0.5 * lambda * u * u;
}

double F_poly(double u, const PotentialSpec& spec) {
    if (spec.order != PotentialSpec::Order::Truncated)
        throw std::invalid_argument("F_poly requires a truncated potential");
    const double u2 = u * u;
    double acc = 0.0;
    for (int k = spec.n; k >= 0; --k)
        acc = acc * u2 + 1.0 / ((2.0 * k + 1.0) * (k + 1.0));
    return u2 * acc - 0.5 * spec.lambda * u2;
}

double potential_density(double u, const PotentialSpec& spec) {
    switch (spec.order) {
        case PotentialSpec::Order::Exact:
            if (std::abs(u) >= 1.0)
                throw SingularInput("potential density: |u| >= 1 in exact mode");
            return F_value(u, spec.lambda);
        case PotentialSpec::Order::Truncated: return F_poly(u, spec);
        case PotentialSpec::Order::Disabled: return 0.0;
    }
    return 0.0;
}

double free_energy(const ModeVector& v, const PotentialSpec& spec, std::size_t grid_size) {
    const std::size_t q_size = grid_size == 0 ? default_grid_size(v.order()) : grid_size;
    const GridVector g = synthesize(v, q_size);
    double potential = 0.0;
    for (double u : g.values) potential += potential_density(u, spec);
    potential /= static_cast<double>(q_size);
    const double grad = seminorm(v, 1.0);
    return 0.5 * grad * grad + potential;
}

namespace {

void require_open_interval(double c, const char* who) {
    if (!(std::abs(c) < 1.0))
        throw std::invalid_argument(std::string(who) + ": |c| must be < 1");
}

// 2 Σ_{k≥k0} c^{2k+2}/((2k+1)(2k+2)).
double even_entropy_tail(double c, int k0, SeriesOptions opts) {
    const double c2 = c * c;
    double pow = std::pow(c2, k0 + 1);
    double sum = 0.0;
    for (int k = k0; k < k0 + opts.max_terms; ++k) {
        const double term = 2.0 * pow / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
        sum += term;
        if (term * c2 / (1.0 - c2) < opts.tol) break;
        pow *= c2;
    }
    return sum;
}

}  // namespace

double P_c(double lambda, double c) {
    require_open_interval(c, "P_c");
    const double d = 1.0 - lambda;
    return 1.5 * d * d - c * c * lambda + F_value(c, 0.0);
}

double Q_c(double lambda, double c, double trace_m1) { return trace_m1 + P_c(lambda, c); }

std::pair<double, double> lambda_star(double c, SeriesOptions opts) {
    require_open_interval(c, "lambda_star");
    return {c * c / 3.0 + 1.0, even_entropy_tail(c, 2, opts)};
}

double discriminant(double c, SeriesOptions opts) {
    require_open_interval(c, "discriminant");
    return -6.0 * even_entropy_tail(c, 2, opts);
}

double truncation_tail_bound(double r, int n, SeriesOptions opts) {
    if (r < 0.0 || r >= 1.0) throw std::invalid_argument("truncation_tail_bound: r must lie in [0,1)");
    const double r2 = r * r;
    double pow = std::pow(r, 2 * n + 3);
    double sum = 0.0;
    double term = 0.0;
    for (int k = n + 1; k < n + 1 + opts.max_terms; ++k) {
        term = 2.0 * pow / (2.0 * k + 1.0);
        sum += term;
        pow *= r2;
        if (term * r2 / (1.0 - r2) < opts.tol) break;
    }
    // Geometric majorant of the remainder.
    return sum + term * r2 / (1.0 - r2);
}

}  // namespace chc
