#include "chc/ergodics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <json.hpp>

#include "chc/errors.hpp"

namespace chc {

ObservableSpec ObservableSpec::mean() {
    ObservableSpec o;
    o.name = "mean";
    o.kind = Kind::Mean;
    o.sup = o.lip = std::numeric_limits<double>::infinity();
    return o;
}

ObservableSpec ObservableSpec::seminorm(double gamma) {
    ObservableSpec o;
    std::ostringstream name;
    name << "seminorm(" << gamma << ")";
    o.name = name.str();
    o.kind = Kind::Seminorm;
    o.gamma = gamma;
    o.sup = std::numeric_limits<double>::infinity();
    o.lip = gamma == -1.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return o;
}

ObservableSpec ObservableSpec::sup_norm() {
    ObservableSpec o;
    o.name = "sup_norm";
    o.kind = Kind::SupNorm;
    o.sup = o.lip = std::numeric_limits<double>::infinity();
    return o;
}

ObservableSpec ObservableSpec::energy() {
    ObservableSpec o;
    o.name = "energy";
    o.kind = Kind::Energy;
    o.sup = o.lip = std::numeric_limits<double>::infinity();
    return o;
}

ObservableSpec ObservableSpec::mode_moment(std::size_t k, int p) {
    if (p < 1) throw std::invalid_argument("mode_moment: power must be at least 1");
    ObservableSpec o;
    o.name = "mode_moment(" + std::to_string(k) + "," + std::to_string(p) + ")";
    o.kind = Kind::ModeMoment;
    o.mode = k;
    o.power = p;
    o.sup = std::numeric_limits<double>::infinity();
    o.lip = p == 1 && k >= 1 ? std::sqrt(eigenvalue(k)) : std::numeric_limits<double>::infinity();
    return o;
}

ObservableSpec ObservableSpec::custom(std::string name, std::function<double(const ModeVector&)> fn, double sup,
                                      double lip) {
    if (!fn) throw std::invalid_argument("custom observable needs a function");
    if (!std::isfinite(sup) || !std::isfinite(lip) || sup < 0.0 || lip < 0.0)
        throw std::invalid_argument("custom observable '" + name + "' needs finite |phi|_inf and Lipschitz constant");
    ObservableSpec o;
    o.name = std::move(name);
    o.kind = Kind::Custom;
    o.fn = std::move(fn);
    o.sup = sup;
    o.lip = lip;
    return o;
}

double ObservableSpec::evaluate(const ModeVector& v, const PotentialSpec& potential) const {
    switch (kind) {
        case Kind::Mean:
            return v.mean();
        case Kind::Seminorm:
            return chc::seminorm(v, gamma);
        case Kind::SupNorm:
            return synthesize(v, default_grid_size(v.order())).sup_norm();
        case Kind::Energy:
            return free_energy(v, potential);
        case Kind::ModeMoment:
            return mode <= v.order() ? std::pow(v[mode], power) : 0.0;
        case Kind::Custom:
            return fn(v);
    }
    return 0.0;
}

bool ObservableSpec::bounded_lipschitz() const { return std::isfinite(sup) && std::isfinite(lip); }

namespace {

const std::vector<double>* recorded_series(const Trajectory& traj, const ObservableSpec& obs) {
    using K = ObservableSpec::Kind;
    switch (obs.kind) {
        case K::Mean:
            return &traj.mean;
        case K::Seminorm:
            if (obs.gamma == -1.0) return &traj.norm_m1;
            if (obs.gamma == 1.0) return &traj.norm_1;
            return nullptr;
        case K::SupNorm:
            return &traj.sup;
        case K::Energy:
            return &traj.energy;
        default:
            return nullptr;
    }
}

double student_t_975(std::size_t dof) {
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.975);
}

}  // namespace

TimeAverage time_average(const Trajectory& traj, const ObservableSpec& obs, double burn_in,
                         const PotentialSpec& potential) {
    if (traj.times.empty()) throw InsufficientData("time_average: empty trajectory");
    if (!(burn_in < traj.times.back()))
        throw InsufficientData("time_average: burn-in " + std::to_string(burn_in) + " is not below T=" +
                               std::to_string(traj.times.back()));

    std::size_t first = 0;
    while (first < traj.times.size() && traj.times[first] < burn_in) ++first;
    const std::size_t count = traj.times.size() - first;
    const std::size_t segments = count == 0 ? 0 : count - 1;
    if (segments < 2 * kBatchCount)
        throw InsufficientData("time_average: " + std::to_string(count) + " samples after burn-in, need at least " +
                               std::to_string(2 * kBatchCount + 1));

    std::vector<double> values(count);
    if (const auto* series = recorded_series(traj, obs)) {
        std::copy(series->begin() + static_cast<std::ptrdiff_t>(first), series->end(), values.begin());
    } else {
        if (traj.states.size() != traj.times.size())
            throw std::invalid_argument("time_average: observable '" + obs.name + "' needs stored states");
        for (std::size_t i = 0; i < count; ++i) values[i] = obs.evaluate(traj.states[first + i], potential);
    }

    std::vector<double> batch(kBatchCount, 0.0), length(kBatchCount, 0.0);
    double total = 0.0, total_len = 0.0;
    for (std::size_t s = 0; s < segments; ++s) {
        const double h = traj.times[first + s + 1] - traj.times[first + s];
        const double area = 0.5 * h * (values[s] + values[s + 1]);
        const std::size_t b = s * kBatchCount / segments;
        batch[b] += area;
        length[b] += h;
        total += area;
        total_len += h;
    }
    TimeAverage out;
    out.burn_in = burn_in;
    out.samples = count;
    out.mean = total / total_len;
    double m = 0.0;
    for (std::size_t b = 0; b < kBatchCount; ++b) {
        batch[b] /= length[b];
        m += batch[b];
    }
    m /= static_cast<double>(kBatchCount);
    double ss = 0.0;
    for (double x : batch) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / static_cast<double>(kBatchCount - 1));
    out.se = sd / std::sqrt(static_cast<double>(kBatchCount));
    out.half_width = student_t_975(kBatchCount - 1) * out.se;
    return out;
}

namespace {

std::uint64_t start_key(const ModeVector& x) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (double v : x.coeffs()) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    return h;
}

}  // namespace

ErgodicReport uniqueness_evidence(std::span<const ModeVector> starts, std::span<const ObservableSpec> observables,
                                  const SimConfig& cfg, std::size_t band, double burn_in, std::size_t threads) {
    if (starts.size() < 2) throw std::invalid_argument("uniqueness_evidence: need at least two starts");
    if (observables.empty()) throw std::invalid_argument("uniqueness_evidence: need at least one observable");
    for (const auto& x : starts)
        if (x.mean() != starts.front().mean())
            throw std::invalid_argument("uniqueness_evidence: starts must share the mean");

    ErgodicReport rep;
    rep.T = cfg.T;
    rep.band = band;
    const double lambda = cfg.potential.is_disabled() ? 0.0 : cfg.potential.lambda;

    bool elliptic = !cfg.cov.is_zero() && band >= 1 && band <= cfg.M;
    for (std::size_t k = 1; elliptic && k <= band; ++k) elliptic = cfg.cov[k] > 0.0;
    std::optional<double> delta;
    if (elliptic) {
        try {
            delta = delta_rate(band, lambda).impl_delta;
        } catch (const BandTooSmall&) {
            elliptic = false;
        }
    }
    rep.assumptions_met = elliptic;
    rep.burn_in = burn_in >= 0.0 ? burn_in : (delta ? 10.0 / *delta : cfg.T / 10.0);

    SimConfig run_cfg = cfg;
    for (const auto& o : observables) {
        rep.observables.push_back(o.name);
        if (!recorded_series(Trajectory{}, o)) run_cfg.keep_states = true;
    }

    rep.averages.assign(starts.size(), {});
    parallel_for(starts.size(), threads, [&](std::size_t i) {
        const Trajectory traj = simulate(starts[i], run_cfg, start_key(starts[i]));
        std::vector<TimeAverage> row;
        for (const auto& o : observables) row.push_back(time_average(traj, o, rep.burn_in, cfg.potential));
        rep.averages[i] = std::move(row);
    });

    bool all_within = true;
    for (std::size_t j = 0; j < observables.size(); ++j)
        for (std::size_t a = 0; a < starts.size(); ++a)
            for (std::size_t b = a + 1; b < starts.size(); ++b) {
                Discrepancy d;
                d.observable = observables[j].name;
                d.first = a;
                d.second = b;
                d.difference = std::abs(rep.averages[a][j].mean - rep.averages[b][j].mean);
                d.tolerance = rep.averages[a][j].half_width + rep.averages[b][j].half_width;
                all_within = all_within && d.within();
                rep.discrepancies.push_back(d);
            }
    if (!elliptic)
        rep.verdict = ErgodicReport::kAssumptionUnmet;
    else
        rep.verdict = all_within ? ErgodicReport::kConsistent : ErgodicReport::kViolation;
    return rep;
}

namespace {

nlohmann::json nsweep_json(const NSweepTable& t) {
    nlohmann::json j;
    j["t"] = t.t;
    j["replicas"] = t.replicas;
    j["stiff_replicas"] = t.stiff_replicas;
    j["converging"] = t.converging();
    for (const auto& r : t.rows) {
        nlohmann::json row;
        row["observable"] = r.observable;
        row["n"] = r.n;
        for (const auto& v : r.value) row["value"].push_back({{"mean", v.mean}, {"se", v.se}});
        row["difference"] = r.difference;
        row["difference_se"] = r.difference_se;
        row["monotone"] = r.monotone;
        row["last_within_se"] = r.last_within_se;
        j["rows"].push_back(row);
    }
    return j;
}

}  // namespace

std::string ErgodicReport::to_json() const {
    nlohmann::json j;
    j["T"] = T;
    j["burn_in"] = burn_in;
    j["band"] = band;
    j["assumptions_met"] = assumptions_met;
    j["verdict"] = verdict;
    j["observables"] = observables;
    j["averages"] = nlohmann::json::array();
    for (std::size_t i = 0; i < averages.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& a : averages[i])
            row.push_back({{"mean", a.mean}, {"half_width", a.half_width}, {"se", a.se}, {"samples", a.samples}});
        j["averages"].push_back(row);
    }
    j["discrepancies"] = nlohmann::json::array();
    for (const auto& d : discrepancies)
        j["discrepancies"].push_back({{"observable", d.observable},
                                      {"first", d.first},
                                      {"second", d.second},
                                      {"difference", d.difference},
                                      {"tolerance", d.tolerance},
                                      {"within", d.within()}});
    if (nsweep) j["nsweep"] = nsweep_json(*nsweep);
    return j.dump(2);
}

std::string ErgodicReport::to_text() const {
    std::ostringstream os;
    os << "verdict: " << verdict << "\n";
    os << "T=" << T << "  burn_in=" << burn_in << "  band=" << band << "\n\n";
    os << std::left << std::setw(20) << "observable" << std::setw(8) << "start" << std::right << std::setw(16)
       << "average" << std::setw(16) << "half_width" << "\n";
    os << std::scientific << std::setprecision(6);
    for (std::size_t j = 0; j < observables.size(); ++j)
        for (std::size_t i = 0; i < averages.size(); ++i)
            os << std::left << std::setw(20) << observables[j] << std::setw(8) << i << std::right << std::setw(16)
               << averages[i][j].mean << std::setw(16) << averages[i][j].half_width << "\n";
    os << "\n"
       << std::left << std::setw(20) << "observable" << std::setw(8) << "pair" << std::right << std::setw(16)
       << "difference" << std::setw(16) << "tolerance" << "  ok\n";
    for (const auto& d : discrepancies)
        os << std::left << std::setw(20) << d.observable << std::setw(8)
           << (std::to_string(d.first) + "-" + std::to_string(d.second)) << std::right << std::setw(16)
           << d.difference << std::setw(16) << d.tolerance << "  " << (d.within() ? "yes" : "NO") << "\n";
    if (nsweep) {
        os << "\nn-sweep at t=" << nsweep->t << " (" << nsweep->replicas << " replicas)\n";
        for (const auto& r : nsweep->rows) {
            os << r.observable << "\n";
            for (std::size_t i = 0; i < r.n.size(); ++i) {
                os << "  n=" << std::setw(4) << r.n[i] << std::setw(16) << r.value[i].mean << " +- "
                   << r.value[i].se;
                if (i > 0) os << "  diff " << r.difference[i - 1];
                os << "\n";
            }
        }
    }
    return os.str();
}

std::pair<double, double> clopper_pearson(std::size_t hits, std::size_t n, double alpha) {
    if (n == 0) throw std::invalid_argument("clopper_pearson: no trials");
    if (hits > n) throw std::invalid_argument("clopper_pearson: hits exceed trials");
    const double x = static_cast<double>(hits);
    const double m = static_cast<double>(n);
    const double lo = hits == 0 ? 0.0 : boost::math::ibeta_inv(x, m - x + 1.0, alpha / 2.0);
    const double hi = hits == n ? 1.0 : boost::math::ibeta_inv(x + 1.0, m - x, 1.0 - alpha / 2.0);
    return {lo, hi};
}

std::vector<ExitProbability> exit_probability(const ModeVector& x0, std::span<const double> deltas, double t,
                                              const SimConfig& cfg, std::size_t replicas, std::size_t threads) {
    if (!(t > 0.0)) throw std::invalid_argument("exit_probability: t must be positive");
    if (replicas == 0) throw std::invalid_argument("exit_probability: replicas must be positive");
    for (double d : deltas)
        if (!(d > 0.0)) throw std::invalid_argument("exit_probability: radius must be positive");
    SimConfig run_cfg = cfg;
    run_cfg.T = t;
    run_cfg.save_every = run_cfg.steps();
    run_cfg.keep_states = false;
    std::vector<double> dist(replicas);
    parallel_for(replicas, threads, [&](std::size_t i) {
        dist[i] = seminorm(simulate(x0, run_cfg, i).final_state, -1.0);
    });

    std::vector<ExitProbability> out;
    for (double d : deltas) {
        ExitProbability e;
        e.delta = d;
        e.replicas = replicas;
        e.hits = static_cast<std::size_t>(std::count_if(dist.begin(), dist.end(), [d](double r) { return r <= d; }));
        e.estimate = static_cast<double>(e.hits) / static_cast<double>(replicas);
        e.se = std::sqrt(e.estimate * (1.0 - e.estimate) / static_cast<double>(replicas));
        e.lower_bound = clopper_pearson(e.hits, replicas).first;
        out.push_back(e);
    }
    return out;
}

ExitProbability exit_probability(const ModeVector& x0, double delta, double t, const SimConfig& cfg,
                                 std::size_t replicas, std::size_t threads) {
    const double d[1] = {delta};
    return exit_probability(x0, std::span<const double>(d), t, cfg, replicas, threads).front();
}

bool NSweepTable::converging() const {
    if (rows.empty()) return false;
    return std::all_of(rows.begin(), rows.end(), [](const NSweepRow& r) { return r.monotone && r.last_within_se; });
}

NSweepTable n_limit_sweep(std::span<const int> n_list, std::span<const ObservableSpec> observables, double t,
                          const ModeVector& x0, const SimConfig& cfg, std::size_t replicas, std::size_t threads) {
    if (n_list.empty()) throw std::invalid_argument("n_limit_sweep: empty n list");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] < 0) throw std::invalid_argument("n_limit_sweep: n must be non-negative");
        if (i > 0 && n_list[i] < n_list[i - 1]) throw std::invalid_argument("n_limit_sweep: n list must increase");
    }
    if (!(t > 0.0)) throw std::invalid_argument("n_limit_sweep: t must be positive");
    if (replicas == 0) throw std::invalid_argument("n_limit_sweep: replicas must be positive");
    if (cfg.potential.is_disabled()) throw std::invalid_argument("n_limit_sweep: potential is disabled");

    const std::size_t nn = n_list.size();
    const std::size_t no = observables.size();
    // value[(i * nn + a) * no + j]: replica i, order n_list[a], observable j.
    std::vector<double> value(replicas * nn * no, 0.0);
    std::vector<char> ok(replicas, 1);
    parallel_for(replicas, threads, [&](std::size_t i) {
        for (std::size_t a = 0; a < nn; ++a) {
            SimConfig run_cfg = cfg;
            run_cfg.potential = PotentialSpec::truncated(cfg.potential.lambda, n_list[a]);
            run_cfg.T = t;
            run_cfg.save_every = run_cfg.steps();
            run_cfg.keep_states = false;
            try {
                const ModeVector xt = simulate(x0, run_cfg, i).final_state;
                for (std::size_t j = 0; j < no; ++j)
                    value[(i * nn + a) * no + j] = observables[j].evaluate(xt, run_cfg.potential);
            } catch (const StiffEvent&) {
                ok[i] = 0;
                return;
            }
        }
    });

    NSweepTable table;
    table.t = t;
    for (std::size_t i = 0; i < replicas; ++i) (ok[i] ? table.replicas : table.stiff_replicas) += 1;
    if (table.replicas < 2) throw InsufficientData("n_limit_sweep: fewer than two replicas without stiff events");

    for (std::size_t j = 0; j < no; ++j) {
        NSweepRow row;
        row.observable = observables[j].name;
        row.n.assign(n_list.begin(), n_list.end());
        std::vector<double> col, pair;
        for (std::size_t a = 0; a < nn; ++a) {
            col.clear();
            for (std::size_t i = 0; i < replicas; ++i)
                if (ok[i]) col.push_back(value[(i * nn + a) * no + j]);
            row.value.push_back(SampleStat::of(col));
        }
        for (std::size_t a = 0; a + 1 < nn; ++a) {
            pair.clear();
            for (std::size_t i = 0; i < replicas; ++i)
                if (ok[i]) pair.push_back(value[(i * nn + a + 1) * no + j] - value[(i * nn + a) * no + j]);
            const SampleStat s = SampleStat::of(pair);
            row.difference.push_back(std::abs(row.value[a + 1].mean - row.value[a].mean));
            row.difference_se.push_back(s.se);
        }
        row.monotone = true;
        for (std::size_t a = 1; a < row.difference.size(); ++a)
            row.monotone = row.monotone && row.difference[a] <= row.difference[a - 1];
        row.last_within_se = row.difference.empty() ||
                             row.difference.back() <= row.value[nn - 1].se + row.value[nn - 2].se;
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace chc
