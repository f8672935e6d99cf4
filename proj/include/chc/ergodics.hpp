#pragma once
//
// Long-run statistics: Krylov–Bogoliubov time averages with batch-means
// confidence intervals, start-independence of those averages, ball-hitting
// probabilities and the n → ∞ stability of P_t^n.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chc/coupling.hpp"
#include "chc/dynamics.hpp"

namespace chc {

struct ObservableSpec {
    enum class Kind { Mean, Seminorm, SupNorm, Energy, ModeMoment, Custom };

    std::string name;
    Kind kind = Kind::Mean;
    double gamma = 0.0;     // Seminorm
    std::size_t mode = 1;   // ModeMoment
    int power = 1;          // ModeMoment
    std::function<double(const ModeVector&)> fn;  // Custom
    /// |φ|_∞ and Lipschitz constant w.r.t. |·|_{-1}; infinite when unbounded.
    double sup = 0.0;
    double lip = 0.0;

    static ObservableSpec mean();
    static ObservableSpec seminorm(double gamma);
    static ObservableSpec sup_norm();
    static ObservableSpec energy();
    static ObservableSpec mode_moment(std::size_t k, int p);
    static ObservableSpec custom(std::string name, std::function<double(const ModeVector&)> fn, double sup,
                                 double lip);

    /// φ(v); SupNorm and Energy sample v on the default 4(M+1) grid.
    double evaluate(const ModeVector& v, const PotentialSpec& potential = PotentialSpec::disabled()) const;
    bool bounded_lipschitz() const;
};

struct TimeAverage {
    double mean = 0.0;
    /// Batch-means 95% half-width (Student t with batches - 1 degrees of freedom).
    double half_width = 0.0;
    double se = 0.0;
    double burn_in = 0.0;
    std::size_t samples = 0;

    double lower() const { return mean - half_width; }
    double upper() const { return mean + half_width; }
    bool contains(double x) const { return std::abs(x - mean) <= half_width; }
};

inline constexpr std::size_t kBatchCount = 16;

/// Trapezoid average of φ over [burn_in, T] on the saved times, CI from 16
/// batch means. Observables without a recorded series need keep_states.
TimeAverage time_average(const Trajectory& traj, const ObservableSpec& obs, double burn_in,
                         const PotentialSpec& potential = PotentialSpec::disabled());

struct Discrepancy {
    std::string observable;
    std::size_t first = 0;
    std::size_t second = 0;
    double difference = 0.0;
    double tolerance = 0.0;  // sum of the two half-widths
    bool within() const { return difference <= tolerance; }
};

struct NSweepRow {
    std::string observable;
    std::vector<int> n;
    std::vector<SampleStat> value;
    /// |E φ(n_{i+1}) - E φ(n_i)|, one shorter than n.
    std::vector<double> difference;
    /// SE of the paired per-replica differences.
    std::vector<double> difference_se;
    bool monotone = false;
    bool last_within_se = false;
};

struct NSweepTable {
    double t = 0.0;
    std::size_t replicas = 0;
    /// Replicas dropped because a stiff event occurred at some n.
    std::size_t stiff_replicas = 0;
    std::vector<NSweepRow> rows;

    bool converging() const;
};

struct ErgodicReport {
    static constexpr const char* kConsistent = "consistent with unique invariant measure";
    static constexpr const char* kViolation = "violation detected";
    static constexpr const char* kAssumptionUnmet = "elliptic assumption unmet";

    double T = 0.0;
    double burn_in = 0.0;
    std::size_t band = 0;
    bool assumptions_met = false;
    std::string verdict;
    std::vector<std::string> observables;
    /// averages[i][j]: start i, observable j.
    std::vector<std::vector<TimeAverage>> averages;
    std::vector<Discrepancy> discrepancies;
    std::optional<NSweepTable> nsweep;

    std::string to_json() const;
    std::string to_text() const;
};

/// Long runs from every start (independent noise per distinct start, identical
/// noise for identical starts) and their pairwise time-average discrepancies.
/// burn_in < 0 selects 10/δ when the band condition holds, else T/10.
ErgodicReport uniqueness_evidence(std::span<const ModeVector> starts, std::span<const ObservableSpec> observables,
                                  const SimConfig& cfg, std::size_t band, double burn_in = -1.0,
                                  std::size_t threads = 1);

struct ExitProbability {
    double delta = 0.0;
    double estimate = 0.0;
    double se = 0.0;
    std::size_t hits = 0;
    std::size_t replicas = 0;
    /// One-sided 97.5% Clopper–Pearson lower bound (0 when there are no hits).
    double lower_bound = 0.0;
};

/// Clopper–Pearson two-sided interval (1 - alpha) for hits out of n.
std::pair<double, double> clopper_pearson(std::size_t hits, std::size_t n, double alpha = 0.05);

/// P(|X(t) - c e_0|_{-1} ≤ δ) by Monte Carlo.
ExitProbability exit_probability(const ModeVector& x0, double delta, double t, const SimConfig& cfg,
                                 std::size_t replicas, std::size_t threads = 1);
/// Same samples shared across a list of radii.
std::vector<ExitProbability> exit_probability(const ModeVector& x0, std::span<const double> deltas, double t,
                                              const SimConfig& cfg, std::size_t replicas, std::size_t threads = 1);

/// E φ(X^n(t)) for each n with common noise across n (cfg.potential supplies λ).
NSweepTable n_limit_sweep(std::span<const int> n_list, std::span<const ObservableSpec> observables, double t,
                          const ModeVector& x0, const SimConfig& cfg, std::size_t replicas,
                          std::size_t threads = 1);

}  // namespace chc
