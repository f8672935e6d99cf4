#include "chc/detail/pair_integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "chc/detail/refinement.hpp"
#include "chc/errors.hpp"

namespace chc::detail {

namespace {

double grid_sup(std::span<const double> g) {
    double m = 0.0;
    for (double x : g) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(x));
    }
    return m;
}

double norm_m1(std::span<const double> v) {
    double s = 0.0;
    for (std::size_t k = 1; k < v.size(); ++k) s += v[k] * v[k] / eigenvalue(k);
    return std::sqrt(s);
}

class PairIntegrator {
public:
    PairIntegrator(const SimConfig& cfg, const ModeVector& y0, const ModeVector& d0, const PairOptions& opts)
        : stepper_(cfg),
          opts_(opts),
          lambda_(cfg.potential.is_disabled() ? 0.0 : cfg.potential.lambda),
          ref_(y0),
          diff_(d0),
          cand_ref_(y0),
          cand_diff_(d0),
          ref_grid_(cfg.grid_size()),
          diff_grid_(cfg.grid_size()),
          cand_ref_grid_(cfg.grid_size()),
          cand_diff_grid_(cfg.grid_size()),
          work_grid_(cfg.grid_size()),
          f_modes_(cfg.M + 1),
          pd_modes_(cfg.M + 1),
          w_(cfg.M + 1, 0.0) {
        diff_[0] = 0.0;
        sync_grids(ref_, diff_, ref_grid_, diff_grid_);
        sup_ = pair_sup(ref_grid_, diff_grid_);
        if (opts_.control) {
            if (opts_.band > cfg.M) throw std::invalid_argument("control band exceeds truncation order");
            for (std::size_t k = 1; k <= opts_.band; ++k)
                if (!(cfg.cov[k] > 0.0))
                    throw std::invalid_argument("control requires b_k > 0 for k = 1..N");
        }
        refresh_control();
    }

    bool try_step(std::span<const double> dw, double dt) {
        const std::size_t modes = ref_.size();
        stepper_.nonlinear_modes(ref_grid_, f_modes_);
        stepper_.update(ref_.coeffs(), f_modes_, dw, dt, cand_ref_.coeffs());
        if (stepper_.linear()) {
            std::fill(pd_modes_.begin(), pd_modes_.end(), 0.0);
        } else {
            stepper_.nonlinear().difference(ref_grid_, diff_grid_, work_grid_);
            stepper_.basis().analyze(work_grid_, pd_modes_);
        }
        const double h = 0.5 * dt;
        cand_diff_[0] = 0.0;
        for (std::size_t k = 1; k < modes; ++k) {
            const double a = eigenvalue(k);
            const bool frozen = opts_.control && k <= opts_.band;
            const double lam = frozen ? 0.0 : lambda_;
            cand_diff_[k] = (diff_[k] + h * a * (pd_modes_[k] + lam * diff_[k])) / (1.0 + h * a * a);
        }
        if (stepper_.linear()) {
            candidate_sup_ = (cand_ref_.all_finite() && cand_diff_.all_finite())
                                 ? 0.0
                                 : std::numeric_limits<double>::infinity();
        } else {
            sync_grids(cand_ref_, cand_diff_, cand_ref_grid_, cand_diff_grid_);
            candidate_sup_ = pair_sup(cand_ref_grid_, cand_diff_grid_);
        }
        return stepper_.nonlinear().admissible(candidate_sup_, stepper_.config().sup_guard);
    }

    double candidate_sup() const { return candidate_sup_; }

    void commit(std::span<const double> dw, double dt) {
        if (opts_.control) {
            const auto& cov = stepper_.config().cov;
            double g = 0.0, wsq = 0.0;
            for (std::size_t k = 1; k <= opts_.band; ++k) {
                const double dbeta = dw[k] / std::sqrt(cov[k]);
                g += w_[k] * dbeta - 0.5 * w_[k] * w_[k] * dt;
                wsq += w_[k] * w_[k] * dt;
            }
            log_weight_ += g;
            control_sq_integral_ += wsq;
        }
        std::swap(ref_, cand_ref_);
        std::swap(diff_, cand_diff_);
        std::swap(ref_grid_, cand_ref_grid_);
        std::swap(diff_grid_, cand_diff_grid_);
        sup_ = candidate_sup_;
        refresh_control();
    }

    const ModeVector& reference() const { return ref_; }
    const ModeVector& difference() const { return diff_; }
    double sup() const { return sup_; }
    double control_norm() const {
        double s = 0.0;
        for (double x : w_) s += x * x;
        return std::sqrt(s);
    }
    double control_sq_integral() const { return control_sq_integral_; }
    double log_weight() const { return log_weight_; }
    const Stepper& stepper() const { return stepper_; }

    std::span<const double> reference_grid() {
        if (stepper_.linear()) stepper_.basis().synthesize(ref_.coeffs(), ref_grid_);
        return ref_grid_;
    }
    std::span<const double> shifted_grid() {
        if (stepper_.linear()) sync_grids(ref_, diff_, ref_grid_, diff_grid_);
        for (std::size_t q = 0; q < work_grid_.size(); ++q) work_grid_[q] = ref_grid_[q] + diff_grid_[q];
        return work_grid_;
    }

private:
    void sync_grids(const ModeVector& ref, const ModeVector& diff, std::vector<double>& rg,
                    std::vector<double>& dg) const {
        stepper_.basis().synthesize(ref.coeffs(), rg);
        stepper_.basis().synthesize(diff.coeffs(), dg);
    }

    static double pair_sup(std::span<const double> rg, std::span<const double> dg) {
        double m = grid_sup(rg);
        for (std::size_t q = 0; q < rg.size(); ++q) {
            const double s = rg[q] + dg[q];
            if (!std::isfinite(s)) return std::numeric_limits<double>::infinity();
            m = std::max(m, std::abs(s));
        }
        return m;
    }

    void refresh_control() {
        if (!opts_.control) return;
        control_modes(diff_.coeffs(), stepper_.config().cov, lambda_, opts_.band, w_);
    }

    Stepper stepper_;
    const PairOptions& opts_;
    double lambda_;
    ModeVector ref_, diff_, cand_ref_, cand_diff_;
    std::vector<double> ref_grid_, diff_grid_, cand_ref_grid_, cand_diff_grid_, work_grid_;
    std::vector<double> f_modes_, pd_modes_, w_;
    double sup_ = 0.0;
    double candidate_sup_ = 0.0;
    double log_weight_ = 0.0;
    double control_sq_integral_ = 0.0;
};

void record_state(Trajectory& traj, double t, const ModeVector& v, std::span<const double> grid,
                  const SimConfig& cfg) {
    traj.times.push_back(t);
    traj.mean.push_back(v[0]);
    traj.norm_m1.push_back(norm_m1(v.coeffs()));
    traj.norm_1.push_back(seminorm(v, 1.0));
    traj.sup.push_back(grid_sup(grid));
    double potential = 0.0;
    bool singular = false;
    if (!cfg.potential.is_disabled()) {
        for (double u : grid) {
            if (cfg.potential.order == PotentialSpec::Order::Exact && std::abs(u) >= 1.0) {
                singular = true;
                break;
            }
            potential += potential_density(u, cfg.potential);
        }
        potential /= static_cast<double>(grid.size());
    }
    const double n1 = traj.norm_1.back();
    traj.energy.push_back(singular ? std::numeric_limits<double>::quiet_NaN() : 0.5 * n1 * n1 + potential);
    if (cfg.keep_states) traj.states.push_back(v);
}

}  // namespace

void control_modes(std::span<const double> diff, const CovarianceSpec& cov, double lambda, std::size_t band,
                   std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 1; k <= band && k < diff.size(); ++k) {
        if (!(cov[k] > 0.0)) throw std::invalid_argument("control: b_k = 0 inside the band");
        out[k] = -0.5 * lambda * eigenvalue(k) * diff[k] / std::sqrt(cov[k]);
    }
}

PairRun run_pair(const ModeVector& y0, const ModeVector& d0, const SimConfig& cfg, std::uint64_t replica,
                 const PairOptions& opts) {
    if (d0[0] != 0.0) throw std::invalid_argument("pair difference must have zero mean");
    PairRun run;
    PairIntegrator integ(cfg, y0, d0, opts);
    if (!integ.stepper().nonlinear().admissible(integ.sup(), cfg.sup_guard))
        throw StiffEvent("initial pair outside the admissible band", 0.0, integ.sup());

    auto save = [&](double t) {
        run.times.push_back(t);
        run.distance.push_back(norm_m1(integ.difference().coeffs()));
        run.control_norm.push_back(integ.control_norm());
        run.control_sq_integral.push_back(integ.control_sq_integral());
        run.log_weight.push_back(integ.log_weight());
        if (opts.record_trajectories) {
            record_state(run.reference, t, integ.reference(), integ.reference_grid(), cfg);
            const ModeVector shifted = integ.reference() + integ.difference();
            record_state(run.shifted, t, shifted, integ.shifted_grid(), cfg);
        }
    };

    const CounterRng rng(cfg.seed, replica);
    const std::size_t n_steps = cfg.steps();
    std::vector<double> dw(cfg.M + 1);
    save(0.0);
    double t = 0.0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double h = (i + 1 == n_steps) ? cfg.T - static_cast<double>(i) * cfg.dt : cfg.dt;
        wiener_increment(cfg.cov, h, rng, i, 1, RngDomain::Wiener, dw);
        advance_refined(integ, cfg.cov, rng, std::span<const double>(dw), h, i, 1, 0, cfg.max_halvings, t,
                        run.refinements);
        t = (i + 1 == n_steps) ? cfg.T : static_cast<double>(i + 1) * cfg.dt;
        if (opts.on_step) opts.on_step(i, t, integ.reference(), integ.difference());
        if ((i + 1) % cfg.save_every == 0 || i + 1 == n_steps) save(t);
    }
    run.final_reference = integ.reference();
    run.final_difference = integ.difference();
    if (opts.record_trajectories) {
        run.reference.initial = y0;
        run.reference.final_state = run.final_reference;
        run.shifted.initial = y0 + d0;
        run.shifted.final_state = run.final_reference + run.final_difference;
        run.reference.refinements = run.shifted.refinements = run.refinements;
    }
    return run;
}

}  // namespace chc::detail
