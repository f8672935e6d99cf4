#include "chc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace chc {

namespace {

void require_same_size(const ModeVector& a, const ModeVector& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("ModeVector size mismatch: " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
}

double alpha_power(std::size_t k, double gamma) {
    if (gamma == 0.0) return 1.0;
    if (gamma == 1.0) return eigenvalue(k);
    if (gamma == -1.0) return 1.0 / eigenvalue(k);
    if (gamma == 2.0) return eigenvalue(k) * eigenvalue(k);
    return std::pow(static_cast<double>(k) * kPi, 2.0 * gamma);
}

}  // namespace

ModeVector ModeVector::constant(std::size_t order, double c) {
    ModeVector v(order);
    v[0] = c;
    return v;
}

ModeVector ModeVector::unit(std::size_t order, std::size_t k, double amplitude) {
    if (k > order) throw std::invalid_argument("unit mode index exceeds truncation order");
    ModeVector v(order);
    v[k] = amplitude;
    return v;
}

bool ModeVector::all_finite() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](double x) { return std::isfinite(x); });
}

ModeVector& ModeVector::operator+=(const ModeVector& other) {
    require_same_size(*this, other);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += other.coeffs_[k];
    return *this;
}

ModeVector& ModeVector::operator-=(const ModeVector& other) {
    require_same_size(*this, other);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] -= other.coeffs_[k];
    return *this;
}

ModeVector& ModeVector::operator*=(double s) {
    for (double& x : coeffs_) x *= s;
    return *this;
}

double GridVector::sup_norm() const {
    double m = 0.0;
    for (double x : values) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(x));
    }
    return m;
}

std::size_t default_grid_size(std::size_t order, std::size_t oversample) {
    if (oversample == 0) throw std::invalid_argument("oversample factor must be >= 1");
    return 4 * (order + 1) * oversample;
}

CosineBasis::CosineBasis(std::size_t order, std::size_t grid_size)
    : order_(order), grid_size_(grid_size) {
    if (grid_size < order + 1)
        throw std::invalid_argument("grid size Q=" + std::to_string(grid_size) +
                                    " must be at least M+1=" + std::to_string(order + 1));
    const std::size_t n = (order + 1) * grid_size;
    basis_.resize(n);
    derivative_.resize(n);
    const double root2 = std::sqrt(2.0);
    for (std::size_t q = 0; q < grid_size; ++q) {
        basis_[q] = 1.0;
        derivative_[q] = 0.0;
    }
    for (std::size_t k = 1; k <= order; ++k) {
        const double w = static_cast<double>(k) * kPi;
        for (std::size_t q = 0; q < grid_size; ++q) {
            // Reduce the phase exactly: k(2q+1) mod 4Q indexes a 4Q-periodic table.
            const std::size_t period = 4 * grid_size;
            const std::size_t idx = (k * (2 * q + 1)) % period;
            const double phase = kPi * static_cast<double>(idx) / static_cast<double>(2 * grid_size);
            basis_[k * grid_size + q] = root2 * std::cos(phase);
            derivative_[k * grid_size + q] = -root2 * w * std::sin(phase);
        }
    }
    by_node_.resize(n);
    for (std::size_t q = 0; q < grid_size; ++q)
        for (std::size_t k = 0; k <= order; ++k)
            by_node_[q * (order + 1) + k] = basis_[k * grid_size + q];
}

void CosineBasis::synthesize(std::span<const double> coeffs, std::span<double> values) const {
    if (coeffs.size() != order_ + 1 || values.size() != grid_size_)
        throw std::invalid_argument("CosineBasis::synthesize: shape mismatch");
    std::fill(values.begin(), values.end(), 0.0);
    for (std::size_t k = 0; k <= order_; ++k) {
        const double a = coeffs[k];
        if (a == 0.0) continue;
        const double* row = basis_.data() + k * grid_size_;
        for (std::size_t q = 0; q < grid_size_; ++q) values[q] += a * row[q];
    }
}

void CosineBasis::synthesize_derivative(std::span<const double> coeffs,
                                        std::span<double> values) const {
    if (coeffs.size() != order_ + 1 || values.size() != grid_size_)
        throw std::invalid_argument("CosineBasis::synthesize_derivative: shape mismatch");
    std::fill(values.begin(), values.end(), 0.0);
    for (std::size_t k = 1; k <= order_; ++k) {
        const double a = coeffs[k];
        if (a == 0.0) continue;
        const double* row = derivative_.data() + k * grid_size_;
        for (std::size_t q = 0; q < grid_size_; ++q) values[q] += a * row[q];
    }
}

void CosineBasis::analyze(std::span<const double> values, std::span<double> coeffs) const {
    if (coeffs.size() != order_ + 1 || values.size() != grid_size_)
        throw std::invalid_argument("CosineBasis::analyze: shape mismatch");
    const std::size_t modes = order_ + 1;
    std::fill(coeffs.begin(), coeffs.end(), 0.0);
    for (std::size_t q = 0; q < grid_size_; ++q) {
        const double g = values[q];
        const double* row = by_node_.data() + q * modes;
        for (std::size_t k = 0; k < modes; ++k) coeffs[k] += g * row[k];
    }
    const double inv_q = 1.0 / static_cast<double>(grid_size_);
    for (double& c : coeffs) c *= inv_q;
}

GridVector CosineBasis::synthesize(const ModeVector& v) const {
    GridVector g{std::vector<double>(grid_size_)};
    synthesize(v.coeffs(), g.values);
    return g;
}

ModeVector CosineBasis::analyze(const GridVector& g) const {
    ModeVector v(order_);
    analyze(g.values, v.coeffs());
    return v;
}

GridVector synthesize(const ModeVector& v, std::size_t grid_size) {
    return CosineBasis(v.order(), grid_size).synthesize(v);
}

ModeVector analyze(const GridVector& g, std::size_t order) {
    return CosineBasis(order, g.size()).analyze(g);
}

double seminorm(const ModeVector& v, double gamma) {
    double s = 0.0;
    for (std::size_t k = 1; k < v.size(); ++k) s += alpha_power(k, gamma) * v[k] * v[k];
    return std::sqrt(s);
}

double norm(const ModeVector& v, double gamma) {
    const double semi = seminorm(v, gamma);
    const double mean = v.empty() ? 0.0 : v[0];
    return std::sqrt(semi * semi + mean * mean);
}

double inner_m1(const ModeVector& u, const ModeVector& v) {
    require_same_size(u, v);
    double s = 0.0;
    for (std::size_t k = 1; k < u.size(); ++k) s += u[k] * v[k] / eigenvalue(k);
    return s;
}

ModeVector apply_minus_a_power(const ModeVector& v, double p) {
    ModeVector out = v;
    for (std::size_t k = 1; k < out.size(); ++k) out[k] *= alpha_power(k, p);
    return out;
}

ModeVector project_low(const ModeVector& v, std::size_t band) {
    if (band > v.order()) throw std::invalid_argument("project_low: band exceeds truncation order");
    ModeVector out = v;
    for (std::size_t k = band + 1; k < out.size(); ++k) out[k] = 0.0;
    return out;
}

ModeVector project_high(const ModeVector& v, std::size_t band) {
    if (band > v.order()) throw std::invalid_argument("project_high: band exceeds truncation order");
    ModeVector out = v;
    for (std::size_t k = 0; k <= band; ++k) out[k] = 0.0;
    return out;
}

}  // namespace chc
