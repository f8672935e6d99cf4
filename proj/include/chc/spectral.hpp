#pragma once
//
// Neumann cosine eigenbasis on (0, 1).
//
//   e_0 = 1,  e_k(θ) = √2 cos(kπθ),  -A e_k = α_k e_k,  α_k = (kπ)².
//
// Fields are carried as ModeVector (coefficients of e_0..e_M). Pointwise work
// happens on GridVector samples at midpoint nodes θ_q = (q + ½)/Q, where the
// truncated cosine family is exactly orthogonal for Q ≥ M + 1.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace chc {

inline constexpr double kPi = 3.14159265358979323846;

class ModeVector {
public:
    ModeVector() = default;
    explicit ModeVector(std::size_t order) : coeffs_(order + 1, 0.0) {}
    explicit ModeVector(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {}
    ModeVector(std::initializer_list<double> coeffs) : coeffs_(coeffs) {}

    static ModeVector constant(std::size_t order, double c);
    static ModeVector unit(std::size_t order, std::size_t k, double amplitude = 1.0);

    /// Truncation order M (index of the last mode).
    std::size_t order() const noexcept { return coeffs_.empty() ? 0 : coeffs_.size() - 1; }
    std::size_t size() const noexcept { return coeffs_.size(); }
    bool empty() const noexcept { return coeffs_.empty(); }

    double& operator[](std::size_t k) { return coeffs_[k]; }
    double operator[](std::size_t k) const { return coeffs_[k]; }

    /// Spatial mean; coefficient of e_0.
    double mean() const { return coeffs_.at(0); }

    std::span<double> coeffs() noexcept { return coeffs_; }
    std::span<const double> coeffs() const noexcept { return coeffs_; }
    const std::vector<double>& data() const noexcept { return coeffs_; }

    bool all_finite() const;

    ModeVector& operator+=(const ModeVector& other);
    ModeVector& operator-=(const ModeVector& other);
    ModeVector& operator*=(double s);

    friend ModeVector operator+(ModeVector a, const ModeVector& b) { return a += b; }
    friend ModeVector operator-(ModeVector a, const ModeVector& b) { return a -= b; }
    friend ModeVector operator*(double s, ModeVector a) { return a *= s; }
    friend bool operator==(const ModeVector&, const ModeVector&) = default;

private:
    std::vector<double> coeffs_;
};

struct GridVector {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    static double node(std::size_t q, std::size_t grid_size) {
        return (static_cast<double>(q) + 0.5) / static_cast<double>(grid_size);
    }
    double sup_norm() const;
};

/// α_k = (kπ)², the k-th eigenvalue of -A.
constexpr double eigenvalue(std::size_t k) {
    const double w = static_cast<double>(k) * kPi;
    return w * w;
}

/// Default quadrature size 4(M+1), scaled by an integer oversampling factor.
std::size_t default_grid_size(std::size_t order, std::size_t oversample = 1);

/// Precomputed transform tables for a fixed (M, Q) pair.
///
/// synthesize: values[q] = Σ_k coeffs[k] e_k(θ_q)
/// analyze:    coeffs[k] = (1/Q) Σ_q values[q] e_k(θ_q)
/// The two are exact inverses on band-limited inputs.
class CosineBasis {
public:
    CosineBasis(std::size_t order, std::size_t grid_size);

    std::size_t order() const noexcept { return order_; }
    std::size_t grid_size() const noexcept { return grid_size_; }

    void synthesize(std::span<const double> coeffs, std::span<double> values) const;
    void analyze(std::span<const double> values, std::span<double> coeffs) const;
    /// Samples of dθ Σ_k coeffs[k] e_k at the nodes.
    void synthesize_derivative(std::span<const double> coeffs, std::span<double> values) const;

    GridVector synthesize(const ModeVector& v) const;
    ModeVector analyze(const GridVector& g) const;

private:
    std::size_t order_;
    std::size_t grid_size_;
    // Mode-major: basis_[k * Q + q] = e_k(θ_q); derivative likewise.
    std::vector<double> basis_;
    std::vector<double> derivative_;
    // Node-major copy of basis_ for the analysis sweep.
    std::vector<double> by_node_;
};

GridVector synthesize(const ModeVector& v, std::size_t grid_size);
ModeVector analyze(const GridVector& g, std::size_t order);

/// |v|_γ = (Σ_{k≥1} α_k^γ v_k²)^{1/2}; mode 0 excluded.
double seminorm(const ModeVector& v, double gamma);
/// ‖v‖_γ = (|v|_γ² + v_0²)^{1/2}.
double norm(const ModeVector& v, double gamma);
/// (u, v)_{-1} = Σ_{k≥1} u_k v_k / α_k.
double inner_m1(const ModeVector& u, const ModeVector& v);

/// Multiplies mode k ≥ 1 by α_k^p; mode 0 is left unchanged.
ModeVector apply_minus_a_power(const ModeVector& v, double p);

ModeVector project_low(const ModeVector& v, std::size_t band);
ModeVector project_high(const ModeVector& v, std::size_t band);

}  // namespace chc
