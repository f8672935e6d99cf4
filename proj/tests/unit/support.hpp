#pragma once
// Hand-rolled generators and brute-force oracles shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "chc/spectral.hpp"

namespace chc::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
    std::size_t index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
    }

    /// Random coefficients with amplitude scale / k^decay on modes 1..M and the given mean.
    ModeVector mode_vector(std::size_t order, double scale, double decay = 1.0, double mean = 0.0) {
        ModeVector v(order);
        v[0] = mean;
        for (std::size_t k = 1; k <= order; ++k) v[k] = scale * normal() / std::pow(static_cast<double>(k), decay);
        return v;
    }

private:
    std::mt19937_64 eng_;
};

/// Runs `body` on `count` generated cases; each case gets its own generator.
inline void for_all(int count, std::uint64_t seed, const std::function<void(Gen&)>& body) {
    for (int i = 0; i < count; ++i) {
        Gen g(seed * 1000003ULL + static_cast<std::uint64_t>(i));
        body(g);
    }
}

/// Σ_k v_k e_k(θ) evaluated term by term in long double.
inline double field_at(const ModeVector& v, double theta) {
    long double s = v[0];
    for (std::size_t k = 1; k < v.size(); ++k)
        s += static_cast<long double>(v[k]) * std::sqrt(2.0L) *
             std::cos(static_cast<long double>(k) * 3.14159265358979323846264338327950288L * theta);
    return static_cast<double>(s);
}

/// ∫₀¹ g(θ) e_k(θ) dθ by composite Simpson on `panels` panels.
inline double project_simpson(const std::function<double(double)>& g, std::size_t k, std::size_t panels) {
    const long double pi = 3.14159265358979323846264338327950288L;
    auto ek = [&](long double t) {
        return k == 0 ? 1.0L : std::sqrt(2.0L) * std::cos(static_cast<long double>(k) * pi * t);
    };
    const long double h = 1.0L / static_cast<long double>(panels);
    long double s = 0.0L;
    for (std::size_t i = 0; i <= panels; ++i) {
        const long double t = h * static_cast<long double>(i);
        const long double w = (i == 0 || i == panels) ? 1.0L : (i % 2 ? 4.0L : 2.0L);
        s += w * g(static_cast<double>(t)) * ek(t);
    }
    return static_cast<double>(s * h / 3.0L);
}

inline double max_abs_diff(const ModeVector& a, const ModeVector& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace chc::testing
