#include "chc/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace chc {

CovarianceSpec CovarianceSpec::from_pairs(std::size_t order,
                                          const std::vector<std::pair<std::size_t, double>>& pairs,
                                          std::size_t band) {
    CovarianceSpec cov;
    cov.b.assign(order + 1, 0.0);
    cov.band = band;
    for (const auto& [k, value] : pairs) {
        if (k > order)
            throw std::invalid_argument("covariance mode " + std::to_string(k) +
                                        " exceeds truncation order " + std::to_string(order));
        cov.b[k] = value;
    }
    return cov;
}

bool CovarianceSpec::is_zero() const {
    for (double x : b)
        if (x != 0.0) return false;
    return true;
}

void CovarianceSpec::validate() const {
    if (b.empty()) throw std::invalid_argument("covariance: empty coefficient list");
    if (b[0] != 0.0)
        throw std::invalid_argument("covariance: b_0 != 0, mean-conservation violated");
    for (std::size_t k = 0; k < b.size(); ++k) {
        if (!std::isfinite(b[k]) || b[k] < 0.0)
            throw std::invalid_argument("covariance: b_" + std::to_string(k) + " must be finite and >= 0");
    }
    if (band > order())
        throw std::invalid_argument("covariance: band N=" + std::to_string(band) +
                                    " exceeds truncation order");
    for (std::size_t k = 1; k <= band; ++k) {
        if (!(b[k] > 0.0))
            throw std::invalid_argument("covariance: b_" + std::to_string(k) +
                                        " = 0 inside the elliptic band; assumption "
                                        "\"b_k > 0 for k in {1,...,N}\" violated");
    }
}

bool CovarianceSpec::stated_band_condition(double lambda) const {
    const double n1 = static_cast<double>(band + 1);
    return 0.5 * n1 * n1 - lambda > 0.0;
}

bool CovarianceSpec::band_condition(double lambda) const { return eigenvalue(band + 1) > lambda; }

double trace_gamma(const CovarianceSpec& cov, double gamma) {
    double s = 0.0;
    for (std::size_t k = 1; k < cov.b.size(); ++k) {
        if (cov.b[k] == 0.0) continue;
        s += cov.b[k] * std::pow(eigenvalue(k), gamma);
    }
    return s;
}

void wiener_increment(const CovarianceSpec& cov, double dt, const CounterRng& rng, std::uint64_t step,
                      std::uint32_t node, RngDomain domain, std::span<double> out) {
    const std::size_t modes = out.size();
    out[0] = 0.0;
    for (std::size_t pair = 0; 2 * pair < modes; ++pair) {
        const std::size_t k0 = 2 * pair;
        const std::size_t k1 = k0 + 1;
        const double b0 = k0 == 0 ? 0.0 : cov[k0];
        const double b1 = k1 < modes ? cov[k1] : 0.0;
        if (b0 == 0.0 && b1 == 0.0) {
            if (k0 > 0) out[k0] = 0.0;
            if (k1 < modes) out[k1] = 0.0;
            continue;
        }
        const auto z = rng.normal_pair(domain, step, node, static_cast<std::uint32_t>(pair));
        if (k0 > 0) out[k0] = std::sqrt(b0 * dt) * z[0];
        if (k1 < modes) out[k1] = std::sqrt(b1 * dt) * z[1];
    }
}

ModeVector wiener_increment(const CovarianceSpec& cov, double dt, const CounterRng& rng, std::uint64_t step) {
    if (!(dt > 0.0)) throw std::invalid_argument("wiener_increment: dt must be > 0");
    ModeVector dw(cov.order());
    wiener_increment(cov, dt, rng, step, 1, RngDomain::Wiener, dw.coeffs());
    return dw;
}

LinearLaw linear_law(const ModeVector& x, double t, const CovarianceSpec& cov) {
    if (t < 0.0) throw std::invalid_argument("linear_law: t must be >= 0");
    LinearLaw law;
    law.t = t;
    law.mean.resize(x.size());
    law.variance.assign(x.size(), 0.0);
    law.mean[0] = x[0];
    for (std::size_t k = 1; k < x.size(); ++k) {
        const double a2 = eigenvalue(k) * eigenvalue(k);
        law.mean[k] = std::exp(-0.5 * a2 * t) * x[k];
        law.variance[k] = cov[k] * (-std::expm1(-a2 * t)) / a2;
    }
    return law;
}

ModeVector sample_invariant_gaussian(double c, const CovarianceSpec& cov, const CounterRng& rng,
                                     std::uint64_t index) {
    ModeVector v(cov.order());
    v[0] = c;
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (cov[k] == 0.0) continue;
        const double sd = std::sqrt(cov[k]) / eigenvalue(k);
        v[k] = sd * rng.normal(RngDomain::Initial, index, 0, static_cast<std::uint32_t>(k));
    }
    return v;
}

ModeVector sample_linear_law(const LinearLaw& law, const CounterRng& rng, std::uint64_t index) {
    ModeVector v(std::vector<double>(law.mean));
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (law.variance[k] == 0.0) continue;
        v[k] += std::sqrt(law.variance[k]) *
                rng.normal(RngDomain::Auxiliary, index, 0, static_cast<std::uint32_t>(k));
    }
    return v;
}

}  // namespace chc
