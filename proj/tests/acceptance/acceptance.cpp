// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "chc/coupling.hpp"
#include "chc/dynamics.hpp"
#include "chc/ergodics.hpp"
#include "chc/errors.hpp"
#include "chc/noise.hpp"
#include "chc/potential.hpp"
#include "chc/spectral.hpp"

using namespace chc;

namespace {

const std::size_t kThreads = default_thread_count();

// Largest |mean(X(t)) - c| seen by any suite.
double g_mass_drift = 0.0;
std::size_t g_mass_paths = 0;

void record_mass(const std::vector<double>& mean, double c) {
    for (double m : mean) g_mass_drift = std::max(g_mass_drift, std::abs(m - c));
    ++g_mass_paths;
}

void record_mass(const ModeVector& v, double c) {
    g_mass_drift = std::max(g_mass_drift, std::abs(v[0] - c));
    ++g_mass_paths;
}

struct Stat {
    double mean = 0.0, var = 0.0, se = 0.0;
};

Stat stat_of(const std::vector<double>& x) {
    Stat s;
    const double n = static_cast<double>(x.size());
    s.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    for (double v : x) s.var += (v - s.mean) * (v - s.mean);
    s.var /= n - 1.0;
    s.se = std::sqrt(s.var / n);
    return s;
}

double ks_distance(std::vector<double> x, double mean, double sd) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = 0.5 * std::erfc(-(x[i] - mean) / (sd * std::sqrt(2.0)));
        d = std::max({d, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
    }
    return d;
}

double slope_of_log(const std::vector<double>& t, const std::vector<double>& d) {
    double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(d[i] > 0.0)) continue;
        const double y = std::log(d[i]);
        n += 1;
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
    }
    return (n * sty - st * sy) / (n * stt - st * st);
}

ModeVector random_start(std::mt19937_64& rng, std::size_t M, double c, double amplitude) {
    std::normal_distribution<double> z;
    ModeVector v(M);
    v[0] = c;
    for (std::size_t k = 1; k <= M; ++k) v[k] = amplitude * z(rng) / static_cast<double>(k * k);
    return v;
}

SimConfig nonlinear_config(std::size_t M, double lambda, double dt, double T) {
    SimConfig cfg;
    cfg.M = M;
    cfg.dt = dt;
    cfg.T = T;
    cfg.potential = PotentialSpec::truncated(lambda, 4);
    cfg.cov = CovarianceSpec::from_pairs(M, {{1, 1.0}, {2, 1.0}}, 2);
    cfg.seed = 20261015;
    return cfg;
}

struct Outcome {
    bool pass = true;
    std::string detail;
};

// ---------------------------------------------------------------------------

Outcome linear_oracle() {
    SimConfig cfg;
    cfg.M = 4;
    cfg.dt = 2e-5;
    cfg.T = 1.0;
    cfg.potential = PotentialSpec::disabled();
    cfg.cov = CovarianceSpec::from_pairs(4, {{1, 1.0}, {2, 0.5}}, 2);
    cfg.seed = 101;
    cfg.save_every = cfg.steps();
    const std::size_t R = 10000;
    const ModeVector x0{0.0, 0.1, 0.05, 0.02, 0.0};
    std::vector<ModeVector> finals(R);
    parallel_for(R, kThreads, [&](std::size_t i) {
        const Trajectory tr = simulate(x0, cfg, i);
        finals[i] = tr.final_state;
    });
    const LinearLaw law = linear_law(x0, cfg.T, cfg.cov);
    Outcome o;
    double worst_z = 0.0;
    for (std::size_t k = 0; k <= 4; ++k) {
        std::vector<double> xs(R);
        for (std::size_t i = 0; i < R; ++i) xs[i] = finals[i][k];
        const Stat s = stat_of(xs);
        if (law.variance[k] == 0.0) {
            o.pass = o.pass && s.var <= 1e-30 && std::abs(s.mean - law.mean[k]) <= 1e-15;
            continue;
        }
        const double zm = std::abs(s.mean - law.mean[k]) / std::sqrt(law.variance[k] / R);
        const double zv = std::abs(s.var - law.variance[k]) / (law.variance[k] * std::sqrt(2.0 / (R - 1)));
        worst_z = std::max({worst_z, zm, zv});
    }
    std::vector<double> m1(R);
    for (std::size_t i = 0; i < R; ++i) {
        m1[i] = finals[i][1];
        record_mass(finals[i], 0.0);
    }
    const double ks = ks_distance(m1, law.mean[1], std::sqrt(law.variance[1]));
    o.pass = o.pass && worst_z <= 3.0 && ks < 0.02;
    char buf[160];
    std::snprintf(buf, sizeof buf, "max z = %.2f (<= 3), KS = %.4f (< 0.02)", worst_z, ks);
    o.detail = buf;
    return o;
}

Outcome lipschitz_contraction() {
    const SimConfig cfg = nonlinear_config(32, 1.0, 1e-4, 1.0);
    std::mt19937_64 rng(3);
    const std::size_t P = 100;
    std::vector<ModeVector> xs, ys;
    for (std::size_t i = 0; i < P; ++i) {
        xs.push_back(random_start(rng, 32, 0.0, 0.2));
        ys.push_back(random_start(rng, 32, 0.0, 0.2));
    }
    std::vector<double> worst(P, 0.0);
    std::vector<char> stiff(P, 0);
    parallel_for(P, kThreads, [&](std::size_t i) {
        try {
            const PairResult p = simulate_pair(xs[i], ys[i], cfg, i);
            const double d0 = seminorm(xs[i] - ys[i], -1.0);
            for (std::size_t j = 0; j < p.times.size(); ++j)
                worst[i] = std::max(worst[i], p.distance[j] / (std::exp(p.times[j]) * d0));
            record_mass(p.x.mean, 0.0);
            record_mass(p.y.mean, 0.0);
        } catch (const StiffEvent&) {
            stiff[i] = 1;
        }
    });
    const double w = *std::max_element(worst.begin(), worst.end());
    const auto ns = std::count(stiff.begin(), stiff.end(), 1);
    Outcome o;
    o.pass = w <= 1.05 && ns == 0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "max |X(t,x)-X(t,y)|/(e^t |x-y|) = %.4f (<= 1.05), stiff pairs = %ld", w,
                  static_cast<long>(ns));
    o.detail = buf;
    return o;
}

Outcome coupling_decay() {
    const SimConfig cfg = nonlinear_config(16, 1.0, 5e-5, 0.3);
    const double delta = delta_rate(2, 1.0).impl_delta;
    std::mt19937_64 rng(4);
    const std::size_t P = 50;
    std::vector<ModeVector> xs, ys;
    for (std::size_t i = 0; i < P; ++i) {
        ys.push_back(random_start(rng, 16, 0.0, 0.2));
        ModeVector x = random_start(rng, 16, 0.0, 0.2);
        xs.push_back(x);
    }
    std::vector<double> ratio(P), rate(P);
    parallel_for(P, kThreads, [&](std::size_t i) {
        const CouplingRecord rec = simulate_coupled(xs[i], ys[i], cfg, 2, i);
        double r = 0.0;
        for (std::size_t j = 0; j < rec.times.size(); ++j)
            r = std::max(r, rec.dist_m1[j] / (std::exp(-delta * rec.times[j]) * rec.dist_m1[0]));
        ratio[i] = r;
        rate[i] = -slope_of_log(rec.times, rec.dist_m1);
    });
    const double worst = *std::max_element(ratio.begin(), ratio.end());
    const double slowest = *std::min_element(rate.begin(), rate.end());
    Outcome o;
    o.pass = worst <= 1.05 && slowest >= 0.9 * delta;
    char buf[200];
    std::snprintf(buf, sizeof buf, "max dist/(e^{-delta t} dist0) = %.4f (<= 1.05), min fitted rate = %.3f (>= %.3f)",
                  worst, slowest, 0.9 * delta);
    o.detail = buf;
    return o;
}

Outcome girsanov() {
    const SimConfig cfg = nonlinear_config(16, 1.0, 1e-4, 0.05);
    const ModeVector y0 = ModeVector::unit(16, 1, 0.2) + ModeVector::unit(16, 2, 0.1);
    const double delta = delta_rate(2, 1.0).impl_delta;
    const double kap = 0.5 * std::max(std::pow(eigenvalue(1), 1.5), std::pow(eigenvalue(2), 1.5));
    Outcome o;
    std::string detail;
    for (double d : {1e-3, 1e-2}) {
        const ModeVector x0 = y0 + ModeVector::unit(16, 1, d * kPi);
        const GirsanovGap g = girsanov_gap(x0, y0, cfg, 2, 10000, kThreads);
        const double r = std::max({seminorm(x0, -1.0), seminorm(y0, -1.0), d / std::sqrt(2.0)});
        const double bound = kap / std::sqrt(2 * delta) * std::exp(kap * kap * r * r / (2 * delta)) * d;
        const bool mean_one = std::abs(g.weight.mean - 1.0) <= 3.0 * g.weight.se;
        const bool gap_ok = g.gap.mean <= bound && std::abs(g.bound - bound) <= 1e-12 * bound;
        o.pass = o.pass && mean_one && gap_ok;
        char buf[200];
        std::snprintf(buf, sizeof buf, "d=%.0e: E e^G - 1 = %+.2e (3 SE = %.1e), E|1-e^G| = %.3e <= %.3e; ", d,
                      g.weight.mean - 1.0, 3.0 * g.weight.se, g.gap.mean, bound);
        detail += buf;
    }
    o.detail = detail;
    return o;
}

Outcome budget_m1() {
    Outcome o;
    std::string detail;
    const double a2 = std::pow(kPi, 4);
    for (double c : {0.0, 0.5})
        for (double lambda : {0.0, 1.0}) {
            SimConfig cfg = nonlinear_config(16, lambda, 1e-4, 0.2);
            cfg.c = c;
            cfg.save_every = 50;
            const ModeVector x0 = ModeVector::constant(16, c) + ModeVector::unit(16, 1, 0.3);
            const std::size_t R = 300;
            std::vector<double> lhs(R);
            std::vector<std::vector<double>> sq(R);
            std::vector<double> times;
            parallel_for(R, kThreads, [&](std::size_t i) {
                const Trajectory tr = simulate(x0, cfg, i);
                const double x2 = std::pow(seminorm(tr.initial, -1.0), 2);
                lhs[i] = std::pow(seminorm(tr.final_state, -1.0), 2) - x2 + tr.dissipation_1;
                for (double v : tr.norm_m1) sq[i].push_back(v * v);
                record_mass(tr.mean, c);
                if (i == 0) times = tr.times;
            });
            const double tr_m1 = 1.0 / eigenvalue(1) + 1.0 / eigenvalue(2);
            const double F0 = (1 + c) * std::log1p(c) + (1 - c) * std::log1p(-c);
            const double Q = tr_m1 + 1.5 * (1 - lambda) * (1 - lambda) - c * c * lambda + F0;
            const Stat s = stat_of(lhs);
            bool ok = s.mean <= cfg.T * Q + 3.0 * s.se && std::abs(Q - budget_constant(cfg)) < 1e-12;
            const double x2 = std::pow(seminorm(x0, -1.0), 2);
            double worst = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < times.size(); ++j) {
                std::vector<double> col(R);
                for (std::size_t i = 0; i < R; ++i) col[i] = sq[i][j];
                const Stat e = stat_of(col);
                const double env = (x2 - Q / a2) * std::exp(-a2 * times[j]) + Q / a2;
                const double slack = 3.0 * e.se + 1e-12 * env;
                if (times[j] > 0.0) worst = std::max(worst, (e.mean - env) / e.se);
                ok = ok && e.mean <= env + slack;
            }
            o.pass = o.pass && ok;
            char buf[200];
            std::snprintf(buf, sizeof buf, "(c=%.1f,l=%.0f) %.4f <= %.4f, envelope excess %.2f SE; ", c, lambda,
                          s.mean, cfg.T * Q, worst);
            detail += buf;
        }
    o.detail = detail;
    return o;
}

Outcome budget_0() {
    Outcome o;
    std::string detail;
    for (bool linear : {true, false}) {
        SimConfig cfg = nonlinear_config(16, 0.0, 1e-4, 0.1);
        if (linear) cfg.potential = PotentialSpec::disabled();
        cfg.track_gradient_functional = true;
        const ModeVector x0 = ModeVector::unit(16, 1, 0.3) + ModeVector::unit(16, 3, 0.05);
        const std::size_t R = 200;
        std::vector<double> diss(R), mins(R), funcs(R);
        parallel_for(R, kThreads, [&](std::size_t i) {
            const Trajectory tr = simulate(x0, cfg, i);
            diss[i] = tr.dissipation_2;
            mins[i] = tr.min_gradient_integrand;
            funcs[i] = tr.gradient_functional;
            record_mass(tr.mean, 0.0);
        });
        const double bound = std::pow(seminorm(x0, 0.0), 2) + cfg.T * 2.0;
        const Stat s = stat_of(diss);
        const double min_integrand = *std::min_element(mins.begin(), mins.end());
        const double min_functional = *std::min_element(funcs.begin(), funcs.end());
        o.pass = o.pass && s.mean <= bound + 3.0 * s.se && min_integrand >= 0.0 && min_functional >= 0.0;
        char buf[200];
        std::snprintf(buf, sizeof buf, "%s: E int|X|_2^2 = %.4f <= %.4f, min gradient integrand = %.2e; ",
                      linear ? "linear" : "lambda=0, n=4", s.mean, bound, min_integrand);
        detail += buf;
    }
    o.detail = detail;
    return o;
}

Outcome potential_algebra() {
    bool ok = true;
    double worst_min = 0.0;
    for (double c : {0.0, 0.5, -0.5, 0.9, -0.9}) {
        ok = ok && discriminant(c) <= 0.0;
        double grid_min = std::numeric_limits<double>::infinity();
        for (int i = -50; i <= 50; ++i) {
            const double p = P_c(0.1 * i, c);
            ok = ok && p >= 0.0;
        }
        for (int i = -500000; i <= 500000; ++i) grid_min = std::min(grid_min, P_c(1e-5 * i, c));
        const auto [ls, pmin] = lambda_star(c);
        ok = ok && std::abs(ls - (c * c / 3.0 + 1.0)) < 1e-15;
        ok = ok && pmin <= grid_min + 1e-10 && std::abs(P_c(ls, c) - pmin) <= 1e-10;
        worst_min = std::max(worst_min, pmin - grid_min);
    }
    double worst_tail = -1.0;
    for (int n : {2, 4, 8, 16, 32}) {
        const PotentialSpec s = PotentialSpec::truncated(0.0, n);
        double sup = 0.0;
        for (int i = 0; i <= 18000; ++i) {
            const double u = -0.9 + 1.8 * i / 18000.0;
            sup = std::max(sup, std::abs(f_poly(u, s) - f_exact(u, 0.0)));
        }
        const double tb = truncation_tail_bound(0.9, n);
        ok = ok && sup <= tb + 1e-14;
        worst_tail = std::max(worst_tail, sup / tb);
    }
    Outcome o;
    o.pass = ok;
    char buf[200];
    std::snprintf(buf, sizeof buf, "P_c(lambda*) - grid min = %.1e, max sup|f_n - f| / tail bound = %.3f", worst_min,
                  worst_tail);
    o.detail = buf;
    return o;
}

Outcome ergodic_uniqueness() {
    Outcome o;
    std::string detail;
    {
        SimConfig cfg = nonlinear_config(16, 1.0, 1e-4, 50.0);
        cfg.save_every = 50;
        const std::vector<ModeVector> starts{ModeVector::unit(16, 1, 0.6) + ModeVector::unit(16, 2, 0.1),
                                             ModeVector::unit(16, 1, -0.6) + ModeVector::unit(16, 3, -0.1)};
        const std::vector<ObservableSpec> obs{ObservableSpec::seminorm(-1), ObservableSpec::mode_moment(1, 2),
                                              ObservableSpec::sup_norm()};
        const ErgodicReport r = uniqueness_evidence(starts, obs, cfg, 2, -1.0, kThreads);
        bool ok = r.assumptions_met && r.verdict == ErgodicReport::kConsistent;
        for (const auto& d : r.discrepancies) {
            ok = ok && d.within() && d.tolerance > 0.0;
            char buf[120];
            std::snprintf(buf, sizeof buf, "%s |diff| %.2e <= %.2e; ", d.observable.c_str(), d.difference,
                          d.tolerance);
            detail += buf;
        }
        o.pass = o.pass && ok;
    }
    {
        SimConfig cfg = nonlinear_config(16, 0.0, 1e-5, 50.0);
        cfg.potential = PotentialSpec::disabled();
        cfg.save_every = 100;
        cfg.keep_states = true;
        const ModeVector x0 = ModeVector::unit(16, 1, 0.05);
        const Trajectory tr = simulate(x0, cfg, 7);
        record_mass(tr.mean, 0.0);
        const double a1 = eigenvalue(1), a2 = eigenvalue(2);
        const struct {
            ObservableSpec obs;
            double exact;
        } checks[] = {{ObservableSpec::mean(), 0.0},
                      {ObservableSpec::mode_moment(1, 2), 1.0 / (a1 * a1)},
                      {ObservableSpec::mode_moment(2, 2), 1.0 / (a2 * a2)}};
        for (const auto& ch : checks) {
            const TimeAverage a = time_average(tr, ch.obs, 5.0);
            const bool ok = std::abs(a.mean - ch.exact) <= a.half_width;
            o.pass = o.pass && ok;
            char buf[160];
            std::snprintf(buf, sizeof buf, "linear %s %.4e vs %.4e +- %.1e; ", ch.obs.name.c_str(), a.mean, ch.exact,
                          a.half_width);
            detail += buf;
        }
    }
    o.detail = detail;
    return o;
}

Outcome irreducibility() {
    SimConfig cfg = nonlinear_config(16, 1.0, 1e-4, 2.0);
    const std::vector<ModeVector> starts{ModeVector::unit(16, 1, 0.6), ModeVector::unit(16, 1, -0.6),
                                         ModeVector::unit(16, 2, 0.4) + ModeVector::unit(16, 3, 0.2)};
    Outcome o;
    std::string detail;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        SimConfig run = cfg;
        run.seed = cfg.seed + 1000 * (s + 1);
        const ExitProbability p = exit_probability(starts[s], 0.1, 2.0, run, 1000, kThreads);
        // Independent lower bound: solve the binomial tail for the Clopper-Pearson limit by bisection.
        double lo = 0.0, hi = 1.0;
        if (p.hits == 0) {
            hi = 0.0;
        } else {
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                double tail = 0.0;
                for (std::size_t k = p.hits; k <= p.replicas; ++k)
                    tail += std::exp(std::lgamma(p.replicas + 1.0) - std::lgamma(k + 1.0) -
                                     std::lgamma(p.replicas - k + 1.0) + k * std::log(mid) +
                                     (p.replicas - k) * std::log1p(-mid));
                (tail < 0.025 ? lo : hi) = mid;
            }
        }
        const bool ok = hi > 0.0 && std::abs(hi - p.lower_bound) < 1e-6;
        o.pass = o.pass && ok;
        char buf[160];
        std::snprintf(buf, sizeof buf, "start %zu: %zu/%zu hits, CP lower %.4f; ", s, p.hits, p.replicas,
                      p.lower_bound);
        detail += buf;
    }
    o.detail = detail;
    return o;
}

Outcome n_sweep() {
    SimConfig cfg = nonlinear_config(16, 1.0, 1e-4, 1.0);
    cfg.c = 0.5;
    const ModeVector x0 = ModeVector::constant(16, 0.5) + ModeVector::unit(16, 1, 0.2);
    const std::vector<int> n{2, 4, 8, 16};
    const std::vector<ObservableSpec> obs{ObservableSpec::seminorm(-1)};
    const NSweepTable t = n_limit_sweep(n, obs, 1.0, x0, cfg, 200, kThreads);
    const NSweepRow& r = t.rows.front();
    bool mono = true;
    for (std::size_t i = 1; i < r.difference.size(); ++i) mono = mono && r.difference[i] <= r.difference[i - 1];
    const double combined = r.value[3].se + r.value[2].se;
    Outcome o;
    o.pass = mono && r.difference.back() <= combined && t.stiff_replicas == 0;
    char buf[200];
    std::snprintf(buf, sizeof buf, "diffs %.2e, %.2e, %.2e; last <= %.2e; stiff %zu", r.difference[0],
                  r.difference[1], r.difference[2], combined, t.stiff_replicas);
    o.detail = buf;
    return o;
}

Outcome transforms() {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z;
    double rt = 0.0, pv = 0.0;
    for (std::size_t M : {1u, 4u, 16u, 64u, 128u, 256u}) {
        ModeVector v(M);
        for (std::size_t k = 0; k <= M; ++k) v[k] = z(rng) / (1.0 + 0.05 * k);
        const CosineBasis basis(M, default_grid_size(M));
        const ModeVector back = basis.analyze(basis.synthesize(v));
        for (std::size_t k = 0; k <= M; ++k) rt = std::max(rt, std::abs(back[k] - v[k]));
        // Trapezoid on [0, 1] of the directly summed field.
        const std::size_t fine = 8 * (M + 1);
        long double s = 0.0L;
        for (std::size_t i = 0; i <= fine; ++i) {
            const long double th = static_cast<long double>(i) / fine;
            long double u = v[0];
            for (std::size_t k = 1; k <= M; ++k) u += v[k] * std::sqrt(2.0L) * std::cos(k * 3.14159265358979323846L * th);
            s += (i == 0 || i == fine ? 0.5L : 1.0L) * u * u;
        }
        s /= fine;
        const double n0 = norm(v, 0.0);
        pv = std::max(pv, std::abs(static_cast<double>(s) - n0 * n0));
    }
    Outcome o;
    o.pass = rt <= 1e-10 && pv <= 1e-6;
    char buf[160];
    std::snprintf(buf, sizeof buf, "round trip %.1e (<= 1e-10), Parseval %.1e (<= 1e-6)", rt, pv);
    o.detail = buf;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "linear oracle", linear_oracle},
        {3, "Lipschitz contraction", lipschitz_contraction},
        {4, "coupling decay", coupling_decay},
        {5, "Girsanov weight", girsanov},
        {6, "|.|_{-1} budget", budget_m1},
        {7, "|.|_0 budget", budget_0},
        {8, "potential algebra", potential_algebra},
        {9, "ergodic uniqueness evidence", ergodic_uniqueness},
        {10, "irreducibility probe", irreducibility},
        {11, "finite-n sweep", n_sweep},
        {12, "transforms", transforms},
    };
    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o, double seconds) {
        std::printf("criterion %2d %-30s %s  [%.1fs] %s\n", id, name, o.pass ? "PASS" : "FAIL", seconds,
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    };
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        report(c.id, c.name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    Outcome mass;
    mass.pass = g_mass_drift <= 1e-12 && g_mass_paths > 0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "max |mean - c| = %.1e over %zu paths (<= 1e-12)", g_mass_drift, g_mass_paths);
    mass.detail = buf;
    report(2, "mass conservation", mass, 0.0);
    std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
