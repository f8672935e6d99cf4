#include "chc/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "chc/coupling.hpp"
#include "chc/errors.hpp"

#ifndef CHC_VERSION
#define CHC_VERSION "unknown"
#endif

namespace chc {

namespace {

constexpr std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::Simulate, "simulate"},
    {ExperimentKind::Pair, "pair"},
    {ExperimentKind::Couple, "couple"},
    {ExperimentKind::Girsanov, "girsanov"},
    {ExperimentKind::Asf, "asf"},
    {ExperimentKind::Ergodic, "ergodic"},
    {ExperimentKind::Irreducibility, "irreducibility"},
    {ExperimentKind::NSweep, "nsweep"},
    {ExperimentKind::LinTest, "lintest"},
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (;;) {
        const auto next = s.find(sep, pos);
        out.push_back(trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) return out;
        pos = next + 1;
    }
}

double to_double(const std::string& field, std::string_view text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError(field, "expected a finite number, got '" + t + "'");
    return v;
}

template <class Int>
Int to_integer(const std::string& field, std::string_view text) {
    const std::string t = trim(text);
    Int v{};
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(field, "expected an integer, got '" + t + "'");
    return v;
}

bool to_bool(const std::string& field, std::string_view text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ConfigError(field, "expected true or false, got '" + t + "'");
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "unknown";
}

std::optional<ExperimentKind> parse_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames)
        if (name == n) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Initial states and observables

InitialSpec InitialSpec::parse(std::string_view text) {
    const std::string t = trim(text);
    InitialSpec s;
    if (t == "constant") return s;
    if (t.rfind("gaussian:", 0) == 0) {
        s.kind = Kind::Gaussian;
        s.scale = to_double("initial", std::string_view(t).substr(9));
        return s;
    }
    if (t.rfind("modes:", 0) == 0) {
        s.kind = Kind::Modes;
        for (const auto& item : split(std::string_view(t).substr(6), ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw ConfigError("initial", "mode entry '" + item + "' is not k=value");
            const auto k = to_integer<std::size_t>("initial", std::string_view(item).substr(0, eq));
            if (k == 0) throw ConfigError("initial", "mode 0 is fixed by c");
            s.modes.emplace_back(k, to_double("initial", std::string_view(item).substr(eq + 1)));
        }
        if (s.modes.empty()) throw ConfigError("initial", "empty mode list");
        return s;
    }
    throw ConfigError("initial", "expected constant, gaussian:<scale> or modes:k=v,..., got '" + t + "'");
}

std::string InitialSpec::str() const {
    switch (kind) {
        case Kind::Constant:
            return "constant";
        case Kind::Gaussian:
            return "gaussian:" + fmt(scale);
        case Kind::Modes: {
            std::string s = "modes:";
            for (std::size_t i = 0; i < modes.size(); ++i)
                s += (i ? "," : "") + std::to_string(modes[i].first) + "=" + fmt(modes[i].second);
            return s;
        }
    }
    return "constant";
}

ModeVector InitialSpec::build(const SimConfig& cfg, std::uint64_t index) const {
    ModeVector x = ModeVector::constant(cfg.M, cfg.c);
    if (kind == Kind::Gaussian) {
        const CounterRng rng(cfg.seed, 0);
        ModeVector g = sample_invariant_gaussian(cfg.c, cfg.cov, rng, index);
        for (std::size_t k = 1; k <= cfg.M; ++k) x[k] = scale * g[k];
    } else if (kind == Kind::Modes) {
        for (const auto& [k, v] : modes) {
            if (k > cfg.M) throw ConfigError("initial", "mode " + std::to_string(k) + " exceeds M");
            x[k] = v;
        }
    }
    return x;
}

ObservableSpec parse_observable(std::string_view text) {
    const std::string t = trim(text);
    if (t == "mean") return ObservableSpec::mean();
    if (t == "sup_norm") return ObservableSpec::sup_norm();
    if (t == "energy") return ObservableSpec::energy();
    if (t == "tanh_e1")
        return ObservableSpec::custom(
            "tanh_e1", [](const ModeVector& v) { return std::tanh(v.order() >= 1 ? v[1] / eigenvalue(1) : 0.0); },
            1.0, 1.0 / kPi);
    const auto open = t.find('(');
    if (open != std::string::npos && t.back() == ')') {
        const std::string head = t.substr(0, open);
        const auto args = split(std::string_view(t).substr(open + 1, t.size() - open - 2), ',');
        if (head == "seminorm" && args.size() == 1) return ObservableSpec::seminorm(to_double("observable", args[0]));
        if (head == "mode_moment" && args.size() == 2)
            return ObservableSpec::mode_moment(to_integer<std::size_t>("observable", args[0]),
                                               to_integer<int>("observable", args[1]));
    }
    throw ConfigError("observable", "unknown observable '" + t + "'");
}

// ---------------------------------------------------------------------------
// Configuration text

namespace {

const std::set<std::string> kScalarKeys = {
    "kind", "seed", "M", "Q", "oversample", "dt", "T", "c", "potential", "lambda", "n", "N", "sup_guard",
    "save_every", "max_halvings", "snapshots", "gradient", "replicas", "x0", "y0", "burn_in", "out"};
const std::set<std::string> kListKeys = {"b", "start", "t", "observable", "sweep_n", "radius"};

void check_covariance(const ExperimentConfig& c) {
    const auto& b = c.sim.cov.b;
    if (!b.empty() && b[0] != 0.0)
        throw ConfigError("b[0]", "mean-conservation violated: b_0 must be 0");
    const std::size_t band = c.sim.cov.band;
    if (band > c.sim.M) throw ConfigError("N", "band N=" + std::to_string(band) + " exceeds M");
    for (std::size_t k = 1; k <= band; ++k)
        if (!(c.sim.cov[k] > 0.0))
            throw ConfigError("b[" + std::to_string(k) + "]", "b_k > 0 required for k in {1,...,N} with N=" +
                                                                   std::to_string(band));
    for (std::size_t k = 0; k < b.size(); ++k)
        if (b[k] < 0.0) throw ConfigError("b[" + std::to_string(k) + "]", "b_k must be non-negative");
}

double lambda_of(const SimConfig& s) { return s.potential.is_disabled() ? 0.0 : s.potential.lambda; }

}  // namespace

void ExperimentConfig::validate() const {
    check_covariance(*this);
    try {
        sim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("sim", e.what());
    }
    if (replicas < 1) throw ConfigError("replicas", "must be at least 1");
    auto need_y0 = [&] {
        if (!y0) throw ConfigError("y0", "required for kind " + to_string(kind));
    };
    auto need_band = [&] {
        if (sim.cov.band < 1) throw ConfigError("N", "an elliptic band N >= 1 is required for kind " + to_string(kind));
        try {
            delta_rate(sim.cov.band, lambda_of(sim));
        } catch (const BandTooSmall& e) {
            throw ConfigError("N", e.what());
        }
    };
    auto need_observables = [&] {
        if (observables.empty()) throw ConfigError("observable", "at least one observable is required");
    };
    auto need_single_t = [&] {
        if (times.size() != 1 || !(times[0] > 0.0))
            throw ConfigError("t", "exactly one positive time is required for kind " + to_string(kind));
    };
    for (const auto& o : observables) parse_observable(o);
    for (const auto& x : {std::optional<InitialSpec>(x0), y0})
        if (x && x->kind == InitialSpec::Kind::Modes)
            for (const auto& [k, v] : x->modes)
                if (k > sim.M) throw ConfigError("x0", "mode " + std::to_string(k) + " exceeds M");

    switch (kind) {
        case ExperimentKind::Simulate:
            break;
        case ExperimentKind::Pair:
            need_y0();
            break;
        case ExperimentKind::Couple:
        case ExperimentKind::Girsanov:
            need_y0();
            need_band();
            break;
        case ExperimentKind::Asf:
            need_y0();
            need_band();
            if (times.empty()) throw ConfigError("t", "at least one time is required");
            for (double t : times) {
                const double s = std::round(t / sim.dt);
                if (t < 0.0 || std::abs(s * sim.dt - t) > 1e-9 * std::max(1.0, t))
                    throw ConfigError("t", "time " + fmt(t) + " is not a multiple of dt");
            }
            break;
        case ExperimentKind::Ergodic:
            if (starts.size() < 2) throw ConfigError("start", "at least two starts are required");
            need_observables();
            {
                double effective = burn_in;
                if (effective < 0.0) {
                    effective = sim.T / 10.0;
                    if (sim.cov.band >= 1 && sim.cov.band <= sim.M && eigenvalue(sim.cov.band + 1) > lambda_of(sim))
                        effective = 10.0 / delta_rate(sim.cov.band, lambda_of(sim)).impl_delta;
                }
                if (!(effective < sim.T))
                    throw ConfigError("burn_in", "burn-in " + fmt(effective) + " must be below T=" + fmt(sim.T));
            }
            break;
        case ExperimentKind::Irreducibility:
            need_single_t();
            if (radii.empty()) throw ConfigError("radius", "at least one radius is required");
            for (double r : radii)
                if (!(r > 0.0)) throw ConfigError("radius", "radii must be positive");
            break;
        case ExperimentKind::NSweep:
            need_single_t();
            need_observables();
            if (sweep_n.empty()) throw ConfigError("sweep_n", "at least one order is required");
            for (std::size_t i = 0; i < sweep_n.size(); ++i)
                if (sweep_n[i] < 0 || (i > 0 && sweep_n[i] < sweep_n[i - 1]))
                    throw ConfigError("sweep_n", "orders must be non-negative and increasing");
            if (sim.potential.order != PotentialSpec::Order::Truncated)
                throw ConfigError("potential", "nsweep needs the truncated potential");
            break;
        case ExperimentKind::LinTest:
            if (!sim.potential.is_disabled()) throw ConfigError("potential", "lintest needs potential = disabled");
            if (replicas < 2) throw ConfigError("replicas", "lintest needs at least 2 replicas");
            break;
    }
}

ExperimentConfig parse_config_text(std::string_view text, const std::string& source,
                                   std::optional<ExperimentKind> requested) {
    std::map<std::string, std::string> scalars;
    std::map<std::string, std::vector<std::string>> lists;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw ConfigError(where, "expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (kListKeys.count(key)) {
            lists[key].push_back(value);
        } else if (kScalarKeys.count(key)) {
            if (!scalars.emplace(key, value).second) throw ConfigError(key, "duplicate key at " + where);
        } else {
            throw ConfigError(key, "unknown key at " + where);
        }
    }

    ExperimentConfig c;
    auto get = [&](const char* key) -> const std::string* {
        const auto it = scalars.find(key);
        return it == scalars.end() ? nullptr : &it->second;
    };
    if (auto v = get("kind")) {
        const auto k = parse_kind(*v);
        if (!k) throw ConfigError("kind", "unknown experiment kind '" + *v + "'");
        if (requested && *requested != *k)
            throw ConfigError("kind", "config declares '" + *v + "' but '" + to_string(*requested) +
                                          "' was requested");
        c.kind = *k;
    } else if (requested) {
        c.kind = *requested;
    }
    SimConfig& s = c.sim;
    if (auto v = get("seed")) s.seed = to_integer<std::uint64_t>("seed", *v);
    if (auto v = get("M")) s.M = to_integer<std::size_t>("M", *v);
    if (auto v = get("Q")) s.Q = to_integer<std::size_t>("Q", *v);
    if (auto v = get("oversample")) s.oversample = to_integer<std::size_t>("oversample", *v);
    if (auto v = get("dt")) s.dt = to_double("dt", *v);
    if (auto v = get("T")) s.T = to_double("T", *v);
    if (auto v = get("c")) s.c = to_double("c", *v);
    if (auto v = get("sup_guard")) s.sup_guard = to_double("sup_guard", *v);
    if (auto v = get("save_every")) s.save_every = to_integer<std::size_t>("save_every", *v);
    if (auto v = get("max_halvings")) s.max_halvings = to_integer<int>("max_halvings", *v);
    if (auto v = get("snapshots")) s.keep_states = to_bool("snapshots", *v);
    if (auto v = get("gradient")) s.track_gradient_functional = to_bool("gradient", *v);

    const double lambda = get("lambda") ? to_double("lambda", *get("lambda")) : 1.0;
    const int n = get("n") ? to_integer<int>("n", *get("n")) : 4;
    const std::string pot = get("potential") ? *get("potential") : "truncated";
    if (pot == "truncated")
        s.potential = PotentialSpec::truncated(lambda, n);
    else if (pot == "exact")
        s.potential = PotentialSpec::exact(lambda);
    else if (pot == "disabled")
        s.potential = PotentialSpec::disabled();
    else
        throw ConfigError("potential", "expected truncated, exact or disabled, got '" + pot + "'");
    try {
        s.potential.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("n", e.what());
    }

    std::vector<std::pair<std::size_t, double>> pairs;
    std::set<std::size_t> seen;
    for (const auto& item : lists["b"]) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("b", "expected k:value, got '" + item + "'");
        const auto k = to_integer<std::size_t>("b", std::string_view(item).substr(0, colon));
        const std::string field = "b[" + std::to_string(k) + "]";
        if (k > s.M) throw ConfigError(field, "mode index exceeds M=" + std::to_string(s.M));
        if (!seen.insert(k).second) throw ConfigError(field, "given twice");
        pairs.emplace_back(k, to_double(field, std::string_view(item).substr(colon + 1)));
    }
    const std::size_t band = get("N") ? to_integer<std::size_t>("N", *get("N")) : 0;
    s.cov.b.assign(s.M + 1, 0.0);
    for (const auto& [k, v] : pairs) s.cov.b[k] = v;
    s.cov.band = band;

    if (auto v = get("replicas")) c.replicas = to_integer<std::size_t>("replicas", *v);
    if (auto v = get("x0")) c.x0 = InitialSpec::parse(*v);
    if (auto v = get("y0")) c.y0 = InitialSpec::parse(*v);
    for (const auto& v : lists["start"]) c.starts.push_back(InitialSpec::parse(v));
    for (const auto& v : lists["t"]) c.times.push_back(to_double("t", v));
    for (const auto& v : lists["observable"]) c.observables.push_back(trim(v));
    for (const auto& v : lists["sweep_n"]) c.sweep_n.push_back(to_integer<int>("sweep_n", v));
    for (const auto& v : lists["radius"]) c.radii.push_back(to_double("radius", v));
    if (auto v = get("burn_in")) c.burn_in = to_double("burn_in", *v);
    if (auto v = get("out")) c.out = *v;

    c.validate();
    return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path, std::optional<ExperimentKind> requested) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.string(), requested);
}

std::string emit_config(const ExperimentConfig& c) {
    const SimConfig& s = c.sim;
    std::ostringstream os;
    os << "kind = " << to_string(c.kind) << "\n";
    os << "seed = " << s.seed << "\n";
    os << "M = " << s.M << "\n";
    os << "Q = " << s.Q << "\n";
    os << "oversample = " << s.oversample << "\n";
    os << "dt = " << fmt(s.dt) << "\n";
    os << "T = " << fmt(s.T) << "\n";
    os << "c = " << fmt(s.c) << "\n";
    switch (s.potential.order) {
        case PotentialSpec::Order::Truncated:
            os << "potential = truncated\n";
            break;
        case PotentialSpec::Order::Exact:
            os << "potential = exact\n";
            break;
        case PotentialSpec::Order::Disabled:
            os << "potential = disabled\n";
            break;
    }
    os << "lambda = " << fmt(s.potential.lambda) << "\n";
    os << "n = " << s.potential.n << "\n";
    os << "N = " << s.cov.band << "\n";
    for (std::size_t k = 0; k < s.cov.b.size(); ++k)
        if (s.cov.b[k] != 0.0) os << "b = " << k << ":" << fmt(s.cov.b[k]) << "\n";
    os << "sup_guard = " << fmt(s.sup_guard) << "\n";
    os << "save_every = " << s.save_every << "\n";
    os << "max_halvings = " << s.max_halvings << "\n";
    os << "snapshots = " << (s.keep_states ? "true" : "false") << "\n";
    os << "gradient = " << (s.track_gradient_functional ? "true" : "false") << "\n";
    os << "replicas = " << c.replicas << "\n";
    os << "x0 = " << c.x0.str() << "\n";
    if (c.y0) os << "y0 = " << c.y0->str() << "\n";
    for (const auto& x : c.starts) os << "start = " << x.str() << "\n";
    for (double t : c.times) os << "t = " << fmt(t) << "\n";
    for (const auto& o : c.observables) os << "observable = " << o << "\n";
    for (int n : c.sweep_n) os << "sweep_n = " << n << "\n";
    for (double r : c.radii) os << "radius = " << fmt(r) << "\n";
    os << "burn_in = " << fmt(c.burn_in) << "\n";
    os << "out = " << c.out << "\n";
    return os.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.out.clear();
    return fnv1a(emit_config(c));
}

// ---------------------------------------------------------------------------
// Run

namespace {

class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& directory() const { return dir_; }
    const std::vector<std::string>& outputs() const { return outputs_; }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        out << content;
        outputs_.push_back(name);
    }

private:
    std::filesystem::path dir_;
    std::vector<std::string> outputs_;
};

std::filesystem::path fresh_directory(const std::filesystem::path& root, const std::string& hash) {
    std::filesystem::create_directories(root);
    const std::string stem = hash.substr(0, 12);
    for (int i = 0;; ++i) {
        const auto dir = root / (i == 0 ? stem : stem + "-" + std::to_string(i));
        if (std::filesystem::create_directory(dir)) return dir;
    }
}

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt(v);
}

std::string trajectory_csv(const Trajectory& tr) {
    std::ostringstream os;
    os << "t,mean,norm_m1,norm_1,sup,energy\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        os << num(tr.times[i]) << ',' << num(tr.mean[i]) << ',' << num(tr.norm_m1[i]) << ',' << num(tr.norm_1[i])
           << ',' << num(tr.sup[i]) << ',' << num(tr.energy[i]) << '\n';
    return os.str();
}

std::string snapshots_json(const Trajectory& tr, std::size_t order) {
    nlohmann::json j;
    j["M"] = order;
    j["times"] = tr.times;
    j["states"] = nlohmann::json::array();
    for (const auto& s : tr.states) j["states"].push_back(s.data());
    return j.dump();
}

double mass_drift(const Trajectory& tr, double c) {
    double worst = 0.0;
    for (double m : tr.mean) worst = std::max(worst, std::abs(m - c));
    return worst;
}

struct Context {
    const ExperimentConfig& cfg;
    const RunOptions& opts;
    ArtifactWriter& writer;
    std::vector<std::string>& failures;
    nlohmann::json& summary;

    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

void run_simulate(Context& cx) {
    const SimConfig& base = cx.cfg.sim;
    const ModeVector x0 = cx.cfg.x0.build(base, 0);
    if (cx.cfg.replicas == 1) {
        const Trajectory tr = simulate(x0, base, 0);
        cx.writer.write("trajectory.csv", trajectory_csv(tr));
        if (base.keep_states) cx.writer.write("snapshots.json", snapshots_json(tr, base.M));
        const EnergyBudget b = ito_budget_m1(tr, base);
        cx.summary["budget_m1"] = {{"lhs", b.lhs()},
                                   {"martingale", b.martingale},
                                   {"bound_minus_initial", b.bound - b.initial_seminorm_sq}};
        cx.summary["mass_drift"] = mass_drift(tr, base.c);
        cx.summary["refinements"] = tr.refinements;
        cx.require(mass_drift(tr, base.c) <= 1e-12, "mass conservation");
        return;
    }

    SimConfig sim = base;
    sim.track_gradient_functional = true;
    const std::size_t R = cx.cfg.replicas;
    std::vector<Trajectory> keep(1);
    std::vector<std::vector<double>> sq(R);
    std::vector<double> lhs(R), diss2(R), drift(R), min_gf(R);
    std::vector<double> times;
    parallel_for(R, cx.opts.threads, [&](std::size_t i) {
        Trajectory tr = simulate(x0, sim, i);
        const EnergyBudget b1 = ito_budget_m1(tr, sim);
        lhs[i] = b1.lhs();
        diss2[i] = tr.dissipation_2;
        drift[i] = mass_drift(tr, sim.c);
        min_gf[i] = tr.min_gradient_integrand;
        sq[i].resize(tr.norm_m1.size());
        for (std::size_t k = 0; k < tr.norm_m1.size(); ++k) sq[i][k] = tr.norm_m1[k] * tr.norm_m1[k];
        if (i == 0) {
            times = tr.times;
            keep[0] = std::move(tr);
        }
    });
    cx.writer.write("trajectory.csv", trajectory_csv(keep[0]));

    const double q = budget_constant(sim);
    const double x_sq = std::pow(seminorm(x0, -1.0), 2);
    const double a1sq = eigenvalue(1) * eigenvalue(1);
    std::ostringstream ens;
    ens << "t,norm_m1_sq_mean,norm_m1_sq_se,gronwall_envelope\n";
    bool envelope_ok = true;
    std::vector<double> col(R);
    for (std::size_t k = 0; k < times.size(); ++k) {
        for (std::size_t i = 0; i < R; ++i) col[i] = sq[i][k];
        const SampleStat s = SampleStat::of(col);
        const double env = (x_sq - q / a1sq) * std::exp(-a1sq * times[k]) + q / a1sq;
        envelope_ok = envelope_ok && s.mean <= env + 3.0 * s.se;
        ens << num(times[k]) << ',' << num(s.mean) << ',' << num(s.se) << ',' << num(env) << '\n';
    }
    cx.writer.write("ensemble.csv", ens.str());

    const SampleStat l = SampleStat::of(lhs);
    const SampleStat d2 = SampleStat::of(diss2);
    const double bound1 = sim.T * q;
    const double bound0 = std::pow(seminorm(x0, 0.0), 2) + sim.T * trace_gamma(sim.cov, 0.0);
    const double worst_drift = *std::max_element(drift.begin(), drift.end());
    const double worst_gf = *std::min_element(min_gf.begin(), min_gf.end());
    nlohmann::json budget;
    budget["m1"] = {{"lhs_mean", l.mean}, {"lhs_se", l.se}, {"bound", bound1}, {"Q_c", q}};
    budget["zero"] = {{"dissipation_mean", d2.mean}, {"dissipation_se", d2.se}, {"bound", bound0}};
    budget["gronwall_ok"] = envelope_ok;
    budget["min_gradient_integrand"] = worst_gf;
    budget["mass_drift"] = worst_drift;
    cx.writer.write("budget.json", budget.dump(2));
    cx.summary["budget"] = budget;

    cx.require(worst_drift <= 1e-12, "mass conservation");
    cx.require(l.mean <= bound1 + 3.0 * l.se, "|.|_{-1} budget");
    cx.require(envelope_ok, "Gronwall envelope");
    cx.require(worst_gf >= 0.0, "gradient functional sign");
    const bool level0_applies = !sim.potential.is_disabled() && sim.potential.lambda <= 2.0;
    if (level0_applies || sim.potential.is_disabled())
        cx.require(d2.mean <= bound0 + 3.0 * d2.se, "|.|_0 budget");
}

void run_pair_kind(Context& cx) {
    const SimConfig& sim = cx.cfg.sim;
    const ModeVector x0 = cx.cfg.x0.build(sim, 0);
    const ModeVector y0 = cx.cfg.y0->build(sim, 1);
    const PairResult p = simulate_pair(x0, y0, sim, 0);
    cx.writer.write("trajectory_x.csv", trajectory_csv(p.x));
    cx.writer.write("trajectory_y.csv", trajectory_csv(p.y));
    const double lambda = lambda_of(sim);
    std::ostringstream os;
    os << "t,dist_m1,lipschitz_bound\n";
    double worst = 0.0;
    for (std::size_t i = 0; i < p.times.size(); ++i) {
        const double bound = std::exp(lambda * p.times[i]) * p.distance.front();
        if (bound > 0.0) worst = std::max(worst, p.distance[i] / bound);
        os << num(p.times[i]) << ',' << num(p.distance[i]) << ',' << num(bound) << '\n';
    }
    cx.writer.write("pair.csv", os.str());
    cx.summary["max_ratio_to_lipschitz_bound"] = worst;
    cx.require(worst <= 1.05, "pathwise e^{lambda t} bound");
    cx.require(mass_drift(p.x, sim.c) <= 1e-12 && mass_drift(p.y, sim.c) <= 1e-12, "mass conservation");
}

void run_couple(Context& cx) {
    const SimConfig& sim = cx.cfg.sim;
    const std::size_t band = sim.cov.band;
    const ModeVector x0 = cx.cfg.x0.build(sim, 0);
    const ModeVector y0 = cx.cfg.y0->build(sim, 1);
    const DeltaRate dr = delta_rate(band, lambda_of(sim));
    const double k = kappa(sim.cov, lambda_of(sim), band);
    const std::size_t R = cx.cfg.replicas;
    std::vector<double> ratio(R), control(R), rate(R);
    std::vector<CouplingRecord> first(1);
    parallel_for(R, cx.opts.threads, [&](std::size_t i) {
        CouplingRecord rec = simulate_coupled(x0, y0, sim, band, i);
        ratio[i] = rec.max_contraction_ratio(dr.impl_delta);
        control[i] = rec.max_control_ratio(k, dr.impl_delta);
        const double window = std::min(0.1, sim.T);
        rate[i] = rec.dist_m1.front() > 0.0 ? fitted_decay_rate(rec.times, rec.dist_m1, window)
                                             : std::numeric_limits<double>::infinity();
        if (i == 0) first[0] = std::move(rec);
    });
    const CouplingRecord& rec = first[0];
    std::ostringstream os;
    os << "t,dist_m1,control_sq_integral,log_weight\n";
    for (std::size_t i = 0; i < rec.times.size(); ++i)
        os << num(rec.times[i]) << ',' << num(rec.dist_m1[i]) << ',' << num(rec.control_sq_integral[i]) << ','
           << num(rec.log_weight[i]) << '\n';
    cx.writer.write("coupling.csv", os.str());

    const double worst_ratio = *std::max_element(ratio.begin(), ratio.end());
    const double worst_control = *std::max_element(control.begin(), control.end());
    const double slowest = *std::min_element(rate.begin(), rate.end());
    nlohmann::json s;
    s["stated_delta"] = dr.stated_delta;
    s["stated_condition"] = dr.stated_condition;
    s["impl_delta"] = dr.impl_delta;
    s["kappa"] = k;
    s["max_contraction_ratio"] = worst_ratio;
    s["max_control_ratio"] = worst_control;
    s["min_fitted_rate"] = std::isfinite(slowest) ? nlohmann::json(slowest) : nlohmann::json(nullptr);
    s["contraction"] = worst_ratio <= 1.05 && slowest >= 0.9 * dr.impl_delta ? "pass" : "fail";
    cx.writer.write("coupling_summary.json", s.dump(2));
    cx.summary["coupling"] = s;
    cx.require(worst_ratio <= 1.05, "pathwise contraction");
    cx.require(slowest >= 0.9 * dr.impl_delta, "fitted decay rate");
    cx.require(worst_control <= 1.05, "control magnitude");
}

void run_girsanov(Context& cx) {
    const SimConfig& sim = cx.cfg.sim;
    const ModeVector x0 = cx.cfg.x0.build(sim, 0);
    const ModeVector y0 = cx.cfg.y0->build(sim, 1);
    const GirsanovGap g = girsanov_gap(x0, y0, sim, sim.cov.band, cx.cfg.replicas, cx.opts.threads);
    nlohmann::json s;
    s["gap_mean"] = g.gap.mean;
    s["gap_se"] = g.gap.se;
    s["weight_mean"] = g.weight.mean;
    s["weight_se"] = g.weight.se;
    s["bound"] = std::isfinite(g.bound) ? nlohmann::json(g.bound) : nlohmann::json(nullptr);
    s["kappa"] = g.kappa;
    s["impl_delta"] = g.delta;
    s["distance"] = g.distance;
    cx.writer.write("girsanov.json", s.dump(2));
    cx.summary["girsanov"] = s;
    cx.require(std::abs(g.weight.mean - 1.0) <= 3.0 * g.weight.se, "E[e^G] = 1");
    cx.require(g.gap.mean <= g.bound, "Girsanov gap bound");
}

void run_asf(Context& cx) {
    const SimConfig& sim = cx.cfg.sim;
    const ModeVector x0 = cx.cfg.x0.build(sim, 0);
    const ModeVector y0 = cx.cfg.y0->build(sim, 1);
    const ObservableSpec phi = parse_observable("tanh_e1");
    const BoundedLipschitz bl{phi.fn, phi.sup, phi.lip};
    const auto est = asf_estimate(bl, x0, y0, cx.cfg.times, sim, sim.cov.band, cx.cfg.replicas, cx.opts.threads);
    std::ostringstream os;
    os << "t,lhs,lhs_se,bound\n";
    for (const auto& e : est) {
        os << num(e.t) << ',' << num(e.lhs) << ',' << num(e.lhs_se) << ',' << num(e.bound) << '\n';
        cx.require(e.lhs <= e.bound + 3.0 * e.lhs_se, "asf bound at t=" + fmt(e.t));
    }
    cx.writer.write("asf.csv", os.str());
}

std::vector<ObservableSpec> observables_of(const ExperimentConfig& c) {
    std::vector<ObservableSpec> out;
    for (const auto& o : c.observables) out.push_back(parse_observable(o));
    return out;
}

void run_ergodic(Context& cx) {
    const SimConfig& sim = cx.cfg.sim;
    std::vector<ModeVector> starts;
    for (std::size_t i = 0; i < cx.cfg.starts.size(); ++i) starts.push_back(cx.cfg.starts[i].build(sim, i));
    const auto obs = observables_of(cx.cfg);
    const ErgodicReport rep = uniqueness_evidence(starts, obs, sim, sim.cov.band, cx.cfg.burn_in, cx.opts.threads);
    cx.writer.write("report.json", rep.to_json());
    cx.writer.write("report.txt", rep.to_text());
    cx.summary["verdict"] = rep.verdict;
    cx.require(rep.verdict != ErgodicReport::kViolation, "start-independence of time averages");
}

void run_irreducibility(Context& cx) {
    const SimConfig& sim = cx.cfg.sim;
    std::vector<InitialSpec> specs = cx.cfg.starts;
    if (specs.empty()) specs.push_back(cx.cfg.x0);
    std::ostringstream os;
    os << "start,radius,estimate,se,hits,replicas,lower_bound\n";
    for (std::size_t s = 0; s < specs.size(); ++s) {
        SimConfig run_cfg = sim;
        run_cfg.seed = mix64(sim.seed ^ mix64(s + 1));
        const auto res = exit_probability(specs[s].build(sim, s), cx.cfg.radii, cx.cfg.times[0], run_cfg,
                                          cx.cfg.replicas, cx.opts.threads);
        for (std::size_t j = 0; j < res.size(); ++j) {
            const auto& e = res[j];
            os << s << ',' << num(e.delta) << ',' << num(e.estimate) << ',' << num(e.se) << ',' << e.hits << ','
               << e.replicas << ',' << num(e.lower_bound) << '\n';
        }
        const auto widest = std::max_element(res.begin(), res.end(),
                                             [](const auto& a, const auto& b) { return a.delta < b.delta; });
        cx.require(widest->lower_bound > 0.0, "positive hitting probability from start " + std::to_string(s));
    }
    cx.writer.write("irreducibility.csv", os.str());
}

void run_nsweep(Context& cx) {
    const SimConfig& sim = cx.cfg.sim;
    const auto obs = observables_of(cx.cfg);
    const NSweepTable t =
        n_limit_sweep(cx.cfg.sweep_n, obs, cx.cfg.times[0], cx.cfg.x0.build(sim, 0), sim, cx.cfg.replicas,
                      cx.opts.threads);
    std::ostringstream os;
    os << "observable,n,mean,se,difference,difference_se\n";
    for (const auto& r : t.rows)
        for (std::size_t i = 0; i < r.n.size(); ++i)
            os << r.observable << ',' << r.n[i] << ',' << num(r.value[i].mean) << ',' << num(r.value[i].se) << ','
               << (i ? num(r.difference[i - 1]) : "") << ',' << (i ? num(r.difference_se[i - 1]) : "") << '\n';
    cx.writer.write("nsweep.csv", os.str());
    cx.summary["stiff_replicas"] = t.stiff_replicas;
    cx.summary["converging"] = t.converging();
    for (const auto& r : t.rows) {
        cx.require(r.monotone, r.observable + ": differences decrease");
        cx.require(r.last_within_se, r.observable + ": last difference within SE");
    }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void run_lintest(Context& cx) {
    const SimConfig& base = cx.cfg.sim;
    SimConfig sim = base;
    sim.save_every = sim.steps();
    const ModeVector x0 = cx.cfg.x0.build(sim, 0);
    const std::size_t R = cx.cfg.replicas;
    const std::size_t modes = sim.M + 1;
    std::vector<double> finals(R * modes);
    parallel_for(R, cx.opts.threads, [&](std::size_t i) {
        const Trajectory tr = simulate(x0, sim, i);
        std::copy(tr.final_state.data().begin(), tr.final_state.data().end(), finals.begin() + i * modes);
    });
    const LinearLaw law = linear_law(x0, sim.T, sim.cov);
    std::ostringstream os;
    os << "k,law_mean,sample_mean,mean_z,law_var,sample_var,var_z\n";
    std::vector<double> col(R);
    for (std::size_t k = 0; k < modes; ++k) {
        for (std::size_t i = 0; i < R; ++i) col[i] = finals[i * modes + k];
        const SampleStat s = SampleStat::of(col);
        double ss = 0.0;
        for (double x : col) ss += (x - s.mean) * (x - s.mean);
        const double var = ss / static_cast<double>(R - 1);
        double mz = 0.0, vz = 0.0;
        if (law.variance[k] > 0.0) {
            mz = (s.mean - law.mean[k]) / std::sqrt(law.variance[k] / static_cast<double>(R));
            vz = (var - law.variance[k]) / (law.variance[k] * std::sqrt(2.0 / static_cast<double>(R - 1)));
            cx.require(std::abs(mz) <= 3.0 && std::abs(vz) <= 3.0, "mode " + std::to_string(k) + " moments");
        } else {
            cx.require(std::abs(s.mean - law.mean[k]) <= 1e-10 + 1e-6 * std::abs(law.mean[k]) && var == 0.0,
                       "deterministic mode " + std::to_string(k));
        }
        os << k << ',' << num(law.mean[k]) << ',' << num(s.mean) << ',' << num(mz) << ',' << num(law.variance[k])
           << ',' << num(var) << ',' << num(vz) << '\n';
    }
    cx.writer.write("lintest.csv", os.str());
    if (law.variance.size() > 1 && law.variance[1] > 0.0) {
        for (std::size_t i = 0; i < R; ++i) col[i] = finals[i * modes + 1];
        std::sort(col.begin(), col.end());
        const double sd = std::sqrt(law.variance[1]);
        double ks = 0.0;
        for (std::size_t i = 0; i < R; ++i) {
            const double F = normal_cdf((col[i] - law.mean[1]) / sd);
            ks = std::max({ks, F - static_cast<double>(i) / R, static_cast<double>(i + 1) / R - F});
        }
        const double limit = 0.02 * std::sqrt(1e4 / static_cast<double>(R));
        cx.summary["ks_mode1"] = ks;
        cx.summary["ks_limit"] = limit;
        cx.require(ks < limit, "KS distance of mode 1");
    }
}

}  // namespace

RunManifest run(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    RunManifest m;
    m.kind = to_string(cfg.kind);
    m.config_hash = hex64(config_hash(cfg));
    m.code_version = CHC_VERSION;
    m.seed = cfg.sim.seed;
    for (std::size_t i = 0; i < cfg.replicas; ++i) m.stream_keys.push_back(CounterRng(cfg.sim.seed, i).stream_key());

    ArtifactWriter writer(fresh_directory(cfg.out, m.config_hash));
    m.directory = writer.directory();
    writer.write("config.txt", emit_config(cfg));

    nlohmann::json summary = nlohmann::json::object();
    Context cx{cfg, opts, writer, m.failures, summary};
    try {
        switch (cfg.kind) {
            case ExperimentKind::Simulate:
                run_simulate(cx);
                break;
            case ExperimentKind::Pair:
                run_pair_kind(cx);
                break;
            case ExperimentKind::Couple:
                run_couple(cx);
                break;
            case ExperimentKind::Girsanov:
                run_girsanov(cx);
                break;
            case ExperimentKind::Asf:
                run_asf(cx);
                break;
            case ExperimentKind::Ergodic:
                run_ergodic(cx);
                break;
            case ExperimentKind::Irreducibility:
                run_irreducibility(cx);
                break;
            case ExperimentKind::NSweep:
                run_nsweep(cx);
                break;
            case ExperimentKind::LinTest:
                run_lintest(cx);
                break;
        }
        m.status = m.failures.empty() ? "ok" : "assertion-failed";
        m.exit_code = m.failures.empty() ? 0 : kExitAssertion;
    } catch (const StiffEvent& e) {
        m.status = "stiff-event";
        m.exit_code = kExitStiff;
        m.failures.push_back(e.what());
    }
    summary["status"] = m.status;
    summary["failures"] = m.failures;
    writer.write("summary.json", summary.dump(2));
    m.outputs = writer.outputs();
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json j;
    j["kind"] = m.kind;
    j["config_hash"] = m.config_hash;
    j["code_version"] = m.code_version;
    j["wall_clock_seconds"] = m.wall_clock_seconds;
    j["seed"] = m.seed;
    j["stream_keys"] = nlohmann::json::array();
    for (auto k : m.stream_keys) j["stream_keys"].push_back(hex64(k));
    j["config"] = emit_config(cfg);
    j["directory"] = m.directory.string();
    j["outputs"] = m.outputs;
    j["status"] = m.status;
    j["exit_code"] = m.exit_code;
    std::ofstream(m.directory / "manifest.json") << j.dump(2) << '\n';
    return m;
}

// ---------------------------------------------------------------------------
// Plot data

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);
    return lines;
}

}  // namespace

std::filesystem::path emit_plotdata(const std::filesystem::path& manifest, const std::string& series) {
    std::ifstream in(manifest);
    if (!in) throw std::invalid_argument("cannot read manifest '" + manifest.string() + "'");
    const nlohmann::json j = nlohmann::json::parse(in);
    const std::filesystem::path dir = manifest.parent_path();
    for (const auto& name : j.at("outputs")) {
        const std::string file = name.get<std::string>();
        if (std::filesystem::path(file).extension() != ".csv") continue;
        const auto lines = read_lines(dir / file);
        if (lines.empty()) continue;
        const auto header = split(lines[0], ',');
        const auto col = std::find(header.begin(), header.end(), series);
        if (col == header.end() || header[0] != "t") continue;
        const std::size_t c = static_cast<std::size_t>(col - header.begin());
        const auto env = std::find(header.begin(), header.end(), "gronwall_envelope");
        const bool with_env = env != header.end() && series != "gronwall_envelope";
        const std::size_t e = static_cast<std::size_t>(env - header.begin());

        std::ostringstream os;
        os << "t," << series << ",log10_" << series;
        if (with_env) os << ",gronwall_envelope";
        os << '\n';
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const auto row = split(lines[i], ',');
            if (row.size() != header.size()) continue;
            const double v = std::strtod(row[c].c_str(), nullptr);
            os << row[0] << ',' << row[c] << ',' << (v > 0.0 ? fmt(std::log10(v)) : std::string("nan"));
            if (with_env) os << ',' << row[e];
            os << '\n';
        }
        const auto out = dir / ("plot_" + series + ".csv");
        std::ofstream(out) << os.str();
        return out;
    }
    throw std::invalid_argument("unknown series '" + series + "'");
}

}  // namespace chc
