#include "chc/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "chc/detail/pair_integrator.hpp"
#include "chc/errors.hpp"

namespace chc {

DeltaRate delta_rate(std::size_t band, double lambda) {
    const double gap = eigenvalue(band + 1);
    if (!(gap > lambda))
        throw BandTooSmall("band N=" + std::to_string(band) + " too small: alpha_{N+1}=" + std::to_string(gap) +
                           " <= lambda=" + std::to_string(lambda));
    DeltaRate r;
    const double half = 0.5 * static_cast<double>(band + 1) * static_cast<double>(band + 1) - lambda;
    r.stated_condition = half > 0.0;
    r.stated_delta = 2.0 * kPi * std::min(half, 1.0);
    const double a1 = eigenvalue(1);
    r.impl_delta = 0.5 * a1 * std::min(a1, gap - lambda);
    return r;
}

namespace {

double band_gain(const CovarianceSpec& cov, double lambda, std::size_t band, double power) {
    double m = 0.0;
    for (std::size_t k = 1; k <= band; ++k) {
        if (!(cov[k] > 0.0)) throw std::invalid_argument("b_k > 0 required for k = 1..N");
        m = std::max(m, std::pow(eigenvalue(k), power) / std::sqrt(cov[k]));
    }
    return 0.5 * std::abs(lambda) * m;
}

}  // namespace

double kappa(const CovarianceSpec& cov, double lambda, std::size_t band) {
    return band_gain(cov, lambda, band, 1.5);
}

double control_gain_l2(const CovarianceSpec& cov, double lambda, std::size_t band) {
    return band_gain(cov, lambda, band, 1.0);
}

ModeVector control(const ModeVector& y, const CovarianceSpec& cov, double lambda, std::size_t band) {
    if (band > y.order()) throw std::invalid_argument("control band exceeds truncation order");
    ModeVector w(y.order());
    detail::control_modes(y.coeffs(), cov, lambda, band, w.coeffs());
    return w;
}

double girsanov_constant(double kappa, double delta, double r) {
    if (!(delta > 0.0)) throw std::invalid_argument("girsanov_constant: delta must be positive");
    return kappa / std::sqrt(2.0 * delta) * std::exp(kappa * kappa * r * r / (2.0 * delta));
}

double CouplingRecord::max_contraction_ratio(double delta) const {
    if (dist_m1.empty() || dist_m1.front() == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
        worst = std::max(worst, dist_m1[i] / (dist_m1.front() * std::exp(-delta * times[i])));
    return worst;
}

double CouplingRecord::max_control_ratio(double kappa, double delta) const {
    if (dist_m1.empty() || dist_m1.front() == 0.0 || kappa == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
        worst = std::max(worst, control_norm[i] / (kappa * dist_m1.front() * std::exp(-delta * times[i])));
    return worst;
}

namespace {

void check_coupling_inputs(const ModeVector& x0, const ModeVector& y0, const SimConfig& cfg, std::size_t band) {
    cfg.validate();
    if (x0.order() != cfg.M || y0.order() != cfg.M)
        throw std::invalid_argument("initial states must have order M=" + std::to_string(cfg.M));
    if (x0[0] != y0[0]) throw std::invalid_argument("coupled starts must share the mean");
    if (band > cfg.M) throw std::invalid_argument("band exceeds truncation order");
    delta_rate(band, cfg.potential.is_disabled() ? 0.0 : cfg.potential.lambda);
}

ModeVector difference_of(const ModeVector& x0, const ModeVector& y0) {
    ModeVector d = x0 - y0;
    d[0] = 0.0;
    return d;
}

}  // namespace

CouplingRecord simulate_coupled(const ModeVector& x0, const ModeVector& y0, const SimConfig& cfg,
                                std::size_t band, std::uint64_t replica) {
    check_coupling_inputs(x0, y0, cfg, band);
    detail::PairOptions opts;
    opts.control = true;
    opts.band = band;
    detail::PairRun run = detail::run_pair(y0, difference_of(x0, y0), cfg, replica, opts);
    CouplingRecord rec;
    rec.times = std::move(run.times);
    rec.dist_m1 = std::move(run.distance);
    rec.control_norm = std::move(run.control_norm);
    rec.control_sq_integral = std::move(run.control_sq_integral);
    rec.log_weight = std::move(run.log_weight);
    rec.terminal_weight = std::exp(rec.log_weight.back());
    rec.refinements = run.refinements;
    return rec;
}

double fitted_decay_rate(std::span<const double> times, std::span<const double> dist, double t_max) {
    if (times.size() != dist.size()) throw std::invalid_argument("fitted_decay_rate: length mismatch");
    double n = 0.0, st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] > t_max || !(dist[i] > 0.0)) continue;
        const double y = std::log(dist[i]);
        n += 1.0;
        st += times[i];
        sy += y;
        stt += times[i] * times[i];
        sty += times[i] * y;
    }
    const double den = n * stt - st * st;
    if (n < 2.0 || den <= 0.0) throw InsufficientData("fitted_decay_rate: fewer than two usable points");
    return -(n * sty - st * sy) / den;
}

GirsanovGap girsanov_gap(const ModeVector& x0, const ModeVector& y0, const SimConfig& cfg, std::size_t band,
                         std::size_t replicas, std::size_t threads) {
    check_coupling_inputs(x0, y0, cfg, band);
    if (replicas == 0) throw std::invalid_argument("girsanov_gap: replicas must be positive");
    const double lambda = cfg.potential.is_disabled() ? 0.0 : cfg.potential.lambda;
    GirsanovGap out;
    out.delta = delta_rate(band, lambda).impl_delta;
    out.kappa = kappa(cfg.cov, lambda, band);
    const ModeVector d0 = difference_of(x0, y0);
    out.distance = seminorm(d0, -1.0);
    const double r = std::max({seminorm(x0, -1.0), seminorm(y0, -1.0), out.distance / std::sqrt(2.0)});
    out.bound = girsanov_constant(out.kappa, out.delta, r) * out.distance;

    SimConfig run_cfg = cfg;
    run_cfg.save_every = cfg.steps();
    std::vector<double> gaps(replicas), weights(replicas);
    detail::PairOptions opts;
    opts.control = true;
    opts.band = band;
    parallel_for(replicas, threads, [&](std::size_t i) {
        const detail::PairRun run = detail::run_pair(y0, d0, run_cfg, i, opts);
        const double w = std::exp(run.log_weight.back());
        weights[i] = w;
        gaps[i] = std::abs(1.0 - w);
    });
    out.gap = SampleStat::of(gaps);
    out.weight = SampleStat::of(weights);
    return out;
}

std::vector<AsfEstimate> asf_estimate(const BoundedLipschitz& phi, const ModeVector& x0, const ModeVector& y0,
                                      std::span<const double> t_list, const SimConfig& cfg, std::size_t band,
                                      std::size_t replicas, std::size_t threads) {
    check_coupling_inputs(x0, y0, cfg, band);
    if (!phi.fn) throw std::invalid_argument("asf_estimate: observable has no function");
    if (replicas == 0) throw std::invalid_argument("asf_estimate: replicas must be positive");
    if (t_list.empty()) return {};

    std::vector<std::size_t> step_of(t_list.size());
    double t_end = 0.0;
    for (std::size_t j = 0; j < t_list.size(); ++j) {
        const double s = std::round(t_list[j] / cfg.dt);
        if (t_list[j] < 0.0 || std::abs(s * cfg.dt - t_list[j]) > 1e-9 * std::max(1.0, t_list[j]))
            throw std::invalid_argument("asf_estimate: t=" + std::to_string(t_list[j]) +
                                        " is not a multiple of dt");
        step_of[j] = static_cast<std::size_t>(s);
        t_end = std::max(t_end, t_list[j]);
    }

    const double lambda = cfg.potential.is_disabled() ? 0.0 : cfg.potential.lambda;
    const double delta = delta_rate(band, lambda).impl_delta;
    const double k = kappa(cfg.cov, lambda, band);
    const ModeVector d0 = difference_of(x0, y0);
    const double dist = seminorm(d0, -1.0);
    const double r = std::max({seminorm(x0, -1.0), seminorm(y0, -1.0), dist / std::sqrt(2.0)});
    const double c_r = girsanov_constant(k, delta, r);

    // samples[j * replicas + i] = φ(X(t_j, x)) - φ(X(t_j, y)) on replica i.
    std::vector<double> samples(t_list.size() * replicas, 0.0);
    const double phi_diff0 = phi.fn(x0) - phi.fn(y0);
    SimConfig run_cfg = cfg;
    run_cfg.T = std::max(t_end, cfg.dt);
    run_cfg.save_every = run_cfg.steps();

    parallel_for(replicas, threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < t_list.size(); ++j)
            if (step_of[j] == 0) samples[j * replicas + i] = phi_diff0;
        detail::PairOptions opts;
        opts.on_step = [&](std::size_t step, double, const ModeVector& ref, const ModeVector& diff) {
            for (std::size_t j = 0; j < t_list.size(); ++j) {
                if (step_of[j] != step + 1) continue;
                samples[j * replicas + i] = phi.fn(ref + diff) - phi.fn(ref);
            }
        };
        detail::run_pair(y0, d0, run_cfg, i, opts);
    });

    std::vector<AsfEstimate> out;
    for (std::size_t j = 0; j < t_list.size(); ++j) {
        const SampleStat s = SampleStat::of(std::span<const double>(samples).subspan(j * replicas, replicas));
        AsfEstimate e;
        e.t = t_list[j];
        e.lhs = std::abs(s.mean);
        e.lhs_se = s.se;
        e.bound = (c_r * phi.sup + std::exp(-delta * t_list[j]) * phi.lip) * dist;
        out.push_back(e);
    }
    return out;
}

}  // namespace chc
