#pragma once
//
// Diagonal trace-class noise √B dW, B e_k = b_k e_k, and the exact Gaussian
// law of the linear equation dZ = -½A²Z dt + √B dW.

#include <cstdint>
#include <utility>
#include <vector>

#include "chc/rng.hpp"
#include "chc/spectral.hpp"

namespace chc {

struct CovarianceSpec {
    /// b[k] for k = 0..M; b[0] must be 0 so the mean is conserved.
    std::vector<double> b;
    /// Elliptic band: b_k > 0 for k = 1..band.
    std::size_t band = 0;

    static CovarianceSpec from_pairs(std::size_t order, const std::vector<std::pair<std::size_t, double>>& pairs,
                                     std::size_t band);

    std::size_t order() const noexcept { return b.empty() ? 0 : b.size() - 1; }
    double operator[](std::size_t k) const { return k < b.size() ? b[k] : 0.0; }
    bool is_zero() const;

    /// Throws std::invalid_argument naming the violated condition.
    void validate() const;

    /// ½(N+1)² - λ > 0, the band condition in its stated form.
    bool stated_band_condition(double lambda) const;
    /// α_{N+1} > λ, the spectral-gap condition the contraction estimate needs on (0,1).
    bool band_condition(double lambda) const;

    friend bool operator==(const CovarianceSpec&, const CovarianceSpec&) = default;
};

/// Tr_γ = Σ_{k≥1} b_k α_k^γ.
double trace_gamma(const CovarianceSpec& cov, double gamma);

/// Increment √B ΔW over dt: mode k ~ N(0, b_k dt); mode 0 is identically 0.
/// Draws are addressed by the integration step index.
ModeVector wiener_increment(const CovarianceSpec& cov, double dt, const CounterRng& rng,
                            std::uint64_t step = 0);

/// Same, written into an existing vector (hot loop form).
void wiener_increment(const CovarianceSpec& cov, double dt, const CounterRng& rng, std::uint64_t step,
                      std::uint32_t node, RngDomain domain, std::span<double> out);

struct LinearLaw {
    std::vector<double> mean;
    std::vector<double> variance;
    double t = 0.0;
};

/// Law of Z(t, ·, x): mean_k = e^{-α_k² t/2} x_k, var_k = b_k (1 - e^{-α_k² t}) / α_k².
LinearLaw linear_law(const ModeVector& x, double t, const CovarianceSpec& cov);

/// Draw from μ_c: mode 0 = c, mode k ~ N(0, b_k/α_k²).
ModeVector sample_invariant_gaussian(double c, const CovarianceSpec& cov, const CounterRng& rng,
                                     std::uint64_t index = 0);

/// Draw from a LinearLaw (mode-space Gaussian oracle).
ModeVector sample_linear_law(const LinearLaw& law, const CounterRng& rng, std::uint64_t index);

}  // namespace chc
