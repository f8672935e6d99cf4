#include "chc/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>

#include "chc/detail/pair_integrator.hpp"
#include "chc/detail/refinement.hpp"
#include "chc/errors.hpp"

namespace chc {

// ---------------------------------------------------------------------------
// SimConfig

std::size_t SimConfig::grid_size() const { return Q != 0 ? Q : default_grid_size(M, oversample); }

std::size_t SimConfig::steps() const {
    const double ratio = T / dt;
    auto n = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
    return std::max<std::size_t>(n, 1);
}

void SimConfig::validate() const {
    if (M < 1) throw std::invalid_argument("M must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (!(T >= dt)) throw std::invalid_argument("T must be >= dt");
    if (grid_size() < M + 1) throw std::invalid_argument("Q must be >= M+1");
    if (!(std::abs(c) < 1.0)) throw std::invalid_argument("|c| must be < 1");
    if (!(sup_guard > 0.0)) throw std::invalid_argument("sup_guard must be > 0");
    if (save_every < 1) throw std::invalid_argument("save_every must be >= 1");
    if (max_halvings < 0) throw std::invalid_argument("max_halvings must be >= 0");
    potential.validate();
    if (cov.order() != M)
        throw std::invalid_argument("covariance order " + std::to_string(cov.order()) +
                                    " does not match M=" + std::to_string(M));
    cov.validate();
}

const std::vector<double>& Trajectory::series(const std::string& name) const {
    if (name == "t") return times;
    if (name == "mean") return mean;
    if (name == "norm_m1") return norm_m1;
    if (name == "norm_1") return norm_1;
    if (name == "sup") return sup;
    if (name == "energy") return energy;
    throw std::invalid_argument("unknown trajectory series '" + name + "'");
}

// ---------------------------------------------------------------------------
// NonlinearTerm

void NonlinearTerm::evaluate(std::span<const double> u, std::span<double> out) const {
    switch (spec_.order) {
        case PotentialSpec::Order::Truncated: {
            const double lambda = spec_.lambda;
            const int n = spec_.n;
            for (std::size_t q = 0; q < u.size(); ++q) {
                const double x = u[q];
                const double x2 = x * x;
                double acc = 0.0;
                for (int k = n; k >= 0; --k) acc = acc * x2 + 1.0 / (2.0 * k + 1.0);
                out[q] = -2.0 * x * acc + lambda * x;
            }
            break;
        }
        case PotentialSpec::Order::Exact:
            for (std::size_t q = 0; q < u.size(); ++q) out[q] = f_exact(u[q], spec_.lambda);
            break;
        case PotentialSpec::Order::Disabled:
            std::fill(out.begin(), out.end(), 0.0);
            break;
    }
}

void NonlinearTerm::difference(std::span<const double> u, std::span<const double> d,
                               std::span<double> out) const {
    switch (spec_.order) {
        case PotentialSpec::Order::Truncated:
            for (std::size_t q = 0; q < u.size(); ++q)
                out[q] = d[q] * p_divided_difference(u[q], d[q], spec_.n);
            break;
        case PotentialSpec::Order::Exact:
            // ln((1-a)/(1+a)) - ln((1-b)/(1+b)) with a = b + d, in log1p form.
            for (std::size_t q = 0; q < u.size(); ++q) {
                const double b = u[q];
                out[q] = std::log1p(-d[q] / (1.0 - b)) - std::log1p(d[q] / (1.0 + b));
            }
            break;
        case PotentialSpec::Order::Disabled:
            std::fill(out.begin(), out.end(), 0.0);
            break;
    }
}

double NonlinearTerm::gradient_weight(double u) const {
    switch (spec_.order) {
        case PotentialSpec::Order::Truncated: return even_power_sum(u, spec_.n);
        case PotentialSpec::Order::Exact: return 1.0 / (1.0 - u * u);
        case PotentialSpec::Order::Disabled: return 1.0;
    }
    return 1.0;
}

bool NonlinearTerm::admissible(double sup_norm, double guard) const {
    if (!std::isfinite(sup_norm)) return false;
    switch (spec_.order) {
        case PotentialSpec::Order::Truncated: return sup_norm <= guard;
        case PotentialSpec::Order::Exact: return sup_norm < 1.0;
        case PotentialSpec::Order::Disabled: return true;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Stepper

Stepper::Stepper(const SimConfig& cfg)
    : cfg_(cfg),
      basis_(cfg.M, cfg.grid_size()),
      nonlinear_(cfg.potential),
      scratch_grid_(cfg.grid_size()),
      scratch_modes_(cfg.M + 1) {}

void Stepper::nonlinear_modes(std::span<const double> grid, std::span<double> out) const {
    if (linear()) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    nonlinear_.evaluate(grid, scratch_grid_);
    basis_.analyze(scratch_grid_, out);
}

void Stepper::update(std::span<const double> v, std::span<const double> f_modes,
                     std::span<const double> dw, double dt, std::span<double> out) const {
    out[0] = v[0];
    const double h = 0.5 * dt;
    for (std::size_t k = 1; k < v.size(); ++k) {
        const double a = eigenvalue(k);
        out[k] = (v[k] + h * a * f_modes[k] + dw[k]) / (1.0 + h * a * a);
    }
}

double Stepper::gradient_functional_density(std::span<const double> v,
                                            std::span<const double> grid) const {
    basis_.synthesize_derivative(v, scratch_grid_);
    double s = 0.0;
    for (std::size_t q = 0; q < grid.size(); ++q)
        s += scratch_grid_[q] * scratch_grid_[q] * nonlinear_.gradient_weight(grid[q]);
    return 2.0 * s / static_cast<double>(grid.size());
}

// ---------------------------------------------------------------------------
// Single-trajectory integrator

namespace {

double seminorm_sq(std::span<const double> v, int power) {
    double s = 0.0;
    for (std::size_t k = 1; k < v.size(); ++k) {
        const double a = eigenvalue(k);
        const double w = power == 1 ? a : power == 2 ? a * a : 1.0 / a;
        s += w * v[k] * v[k];
    }
    return s;
}

double grid_sup(std::span<const double> g) {
    double m = 0.0;
    for (double x : g) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(x));
    }
    return m;
}

double energy_of(const ModeVector& v, std::span<const double> grid, const PotentialSpec& spec) {
    double potential = 0.0;
    if (!spec.is_disabled()) {
        for (double u : grid) {
            if (spec.order == PotentialSpec::Order::Exact && std::abs(u) >= 1.0)
                return std::numeric_limits<double>::quiet_NaN();
            potential += potential_density(u, spec);
        }
        potential /= static_cast<double>(grid.size());
    }
    return 0.5 * seminorm_sq(v.coeffs(), 1) + potential;
}

class SingleIntegrator {
public:
    SingleIntegrator(const SimConfig& cfg, const ModeVector& x0, Trajectory& traj)
        : stepper_(cfg),
          traj_(traj),
          track_gradient_(cfg.track_gradient_functional),
          state_(x0),
          candidate_(x0),
          grid_(cfg.grid_size()),
          candidate_grid_(cfg.grid_size()),
          f_modes_(cfg.M + 1) {
        stepper_.basis().synthesize(state_.coeffs(), grid_);
        sup_ = grid_sup(grid_);
        refresh_norms(state_, grid_, n1_, n2_, gf_);
    }

    double sup() const { return sup_; }
    const ModeVector& state() const { return state_; }
    std::span<const double> grid() {
        if (stepper_.linear()) stepper_.basis().synthesize(state_.coeffs(), grid_);
        return grid_;
    }
    const Stepper& stepper() const { return stepper_; }

    bool try_step(std::span<const double> dw, double dt) {
        stepper_.nonlinear_modes(grid_, f_modes_);
        stepper_.update(state_.coeffs(), f_modes_, dw, dt, candidate_.coeffs());
        if (stepper_.linear()) {
            candidate_sup_ = candidate_.all_finite() ? 0.0 : std::numeric_limits<double>::infinity();
        } else {
            stepper_.basis().synthesize(candidate_.coeffs(), candidate_grid_);
            candidate_sup_ = grid_sup(candidate_grid_);
        }
        return stepper_.nonlinear().admissible(candidate_sup_, stepper_.config().sup_guard);
    }

    double candidate_sup() const { return candidate_sup_; }

    void commit(std::span<const double> dw, double dt) {
        double n1, n2, gf;
        refresh_norms(candidate_, candidate_grid_, n1, n2, gf);
        traj_.dissipation_1 += 0.5 * dt * (n1_ + n1);
        traj_.dissipation_2 += 0.5 * dt * (n2_ + n2);
        if (track_gradient_) {
            traj_.gradient_functional += 0.5 * dt * (gf_ + gf);
            traj_.min_gradient_integrand = std::min(traj_.min_gradient_integrand, gf);
        }
        double m_m1 = 0.0, m_0 = 0.0;
        for (std::size_t k = 1; k < dw.size(); ++k) {
            if (dw[k] == 0.0) continue;
            m_m1 += state_[k] * dw[k] / eigenvalue(k);
            m_0 += state_[k] * dw[k];
        }
        traj_.martingale_m1 += 2.0 * m_m1;
        traj_.martingale_0 += 2.0 * m_0;
        std::swap(state_, candidate_);
        std::swap(grid_, candidate_grid_);
        sup_ = candidate_sup_;
        n1_ = n1;
        n2_ = n2;
        gf_ = gf;
    }

private:
    void refresh_norms(const ModeVector& v, std::span<const double> grid, double& n1, double& n2,
                       double& gf) {
        n1 = seminorm_sq(v.coeffs(), 1);
        n2 = seminorm_sq(v.coeffs(), 2);
        gf = 0.0;
        if (track_gradient_) {
            if (stepper_.linear()) {
                stepper_.basis().synthesize(v.coeffs(), candidate_grid_);
                gf = stepper_.gradient_functional_density(v.coeffs(), candidate_grid_);
            } else {
                gf = stepper_.gradient_functional_density(v.coeffs(), grid);
            }
        }
    }

    Stepper stepper_;
    Trajectory& traj_;
    bool track_gradient_;
    ModeVector state_;
    ModeVector candidate_;
    std::vector<double> grid_;
    std::vector<double> candidate_grid_;
    std::vector<double> f_modes_;
    double sup_ = 0.0;
    double candidate_sup_ = 0.0;
    double n1_ = 0.0, n2_ = 0.0, gf_ = 0.0;
};

void record(Trajectory& traj, double t, const ModeVector& v, std::span<const double> grid,
            const SimConfig& cfg) {
    traj.times.push_back(t);
    traj.mean.push_back(v[0]);
    traj.norm_m1.push_back(std::sqrt(seminorm_sq(v.coeffs(), -1)));
    traj.norm_1.push_back(std::sqrt(seminorm_sq(v.coeffs(), 1)));
    traj.sup.push_back(grid_sup(grid));
    traj.energy.push_back(energy_of(v, grid, cfg.potential));
    if (cfg.keep_states) traj.states.push_back(v);
}

void check_initial(const ModeVector& x0, const SimConfig& cfg) {
    if (x0.order() != cfg.M)
        throw std::invalid_argument("initial state order " + std::to_string(x0.order()) +
                                    " does not match M=" + std::to_string(cfg.M));
    if (!x0.all_finite()) throw std::invalid_argument("initial state has non-finite coefficients");
}

}  // namespace

// ---------------------------------------------------------------------------
// Public operations

ModeVector step(const ModeVector& v, const ModeVector& dw, const SimConfig& cfg, double dt) {
    if (v.order() != cfg.M || dw.order() != cfg.M)
        throw std::invalid_argument("step: state/increment order does not match M");
    const Stepper stepper(cfg);
    std::vector<double> grid(cfg.grid_size());
    std::vector<double> f_modes(cfg.M + 1, 0.0);
    if (!stepper.linear()) {
        stepper.basis().synthesize(v.coeffs(), grid);
        const double sup = grid_sup(grid);
        if (!stepper.nonlinear().admissible(sup, cfg.sup_guard))
            throw StiffEvent("step: grid sup-norm " + std::to_string(sup) + " exceeds guard", 0.0, sup);
        stepper.nonlinear_modes(grid, f_modes);
    }
    ModeVector out(cfg.M);
    stepper.update(v.coeffs(), f_modes, dw.coeffs(), dt, out.coeffs());
    return out;
}

ModeVector step(const ModeVector& v, const ModeVector& dw, const SimConfig& cfg) {
    return step(v, dw, cfg, cfg.dt);
}

Trajectory simulate(const ModeVector& x0, const SimConfig& cfg, std::uint64_t replica) {
    check_initial(x0, cfg);
    Trajectory traj;
    traj.initial = x0;
    SingleIntegrator integ(cfg, x0, traj);
    if (!integ.stepper().nonlinear().admissible(integ.sup(), cfg.sup_guard))
        throw StiffEvent("initial state outside the admissible band", 0.0, integ.sup());
    if (cfg.track_gradient_functional)
        traj.min_gradient_integrand = std::numeric_limits<double>::infinity();

    const CounterRng rng(cfg.seed, replica);
    const std::size_t n_steps = cfg.steps();
    std::vector<double> dw(cfg.M + 1);
    record(traj, 0.0, integ.state(), integ.grid(), cfg);
    double t = 0.0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double h = (i + 1 == n_steps) ? cfg.T - static_cast<double>(i) * cfg.dt : cfg.dt;
        wiener_increment(cfg.cov, h, rng, i, 1, RngDomain::Wiener, dw);
        detail::advance_refined(integ, cfg.cov, rng, std::span<const double>(dw), h, i, 1, 0,
                                cfg.max_halvings, t, traj.refinements);
        t = (i + 1 == n_steps) ? cfg.T : static_cast<double>(i + 1) * cfg.dt;
        if ((i + 1) % cfg.save_every == 0 || i + 1 == n_steps) record(traj, t, integ.state(), integ.grid(), cfg);
    }
    traj.final_state = integ.state();
    return traj;
}

PairResult simulate_pair(const ModeVector& x0, const ModeVector& y0, const SimConfig& cfg,
                         std::uint64_t replica) {
    check_initial(x0, cfg);
    check_initial(y0, cfg);
    if (x0[0] != y0[0]) throw std::invalid_argument("simulate_pair: starts must share the mean");
    detail::PairOptions opts;
    opts.record_trajectories = true;
    detail::PairRun run = detail::run_pair(y0, x0 - y0, cfg, replica, opts);
    PairResult out;
    out.x = std::move(run.shifted);
    out.y = std::move(run.reference);
    out.times = std::move(run.times);
    out.distance = std::move(run.distance);
    return out;
}

double budget_constant(const SimConfig& cfg) {
    const double tr = trace_gamma(cfg.cov, -1.0);
    if (cfg.potential.is_disabled()) return tr;
    return Q_c(cfg.potential.lambda, cfg.c, tr);
}

EnergyBudget ito_budget_m1(const Trajectory& traj, const SimConfig& cfg) {
    EnergyBudget b;
    b.initial_seminorm_sq = seminorm_sq(traj.initial.coeffs(), -1);
    b.terminal_seminorm_sq = seminorm_sq(traj.final_state.coeffs(), -1);
    b.dissipation = traj.dissipation_1;
    b.martingale = traj.martingale_m1;
    b.bound = b.initial_seminorm_sq + cfg.T * budget_constant(cfg);
    return b;
}

EnergyBudget ito_budget_0(const Trajectory& traj, const SimConfig& cfg) {
    EnergyBudget b;
    b.initial_seminorm_sq = seminorm_sq(traj.initial.coeffs(), 0);
    b.terminal_seminorm_sq = seminorm_sq(traj.final_state.coeffs(), 0);
    b.dissipation = traj.dissipation_2;
    b.martingale = traj.martingale_0;
    b.gradient_functional = traj.gradient_functional;
    b.bound = b.initial_seminorm_sq + cfg.T * trace_gamma(cfg.cov, 0.0);
    return b;
}

SampleStat SampleStat::of(std::span<const double> samples) {
    SampleStat s;
    s.count = samples.size();
    if (samples.empty()) return s;
    double sum = 0.0;
    for (double x : samples) sum += x;
    s.mean = sum / static_cast<double>(samples.size());
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double x : samples) ss += (x - s.mean) * (x - s.mean);
        const double var = ss / static_cast<double>(samples.size() - 1);
        s.se = std::sqrt(var / static_cast<double>(samples.size()));
    }
    return s;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    bool expected = false;
                    if (failed.compare_exchange_strong(expected, true)) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

std::size_t default_thread_count() {
    if (const char* env = std::getenv("CHC_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace chc
