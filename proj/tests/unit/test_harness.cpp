#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "chc/harness.hpp"
#include "support.hpp"

using namespace chc;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(# linear ensemble
kind = simulate
M = 8
dt = 1e-3
T = 0.05
b = 1:1.0
b = 2:0.5
N = 2
x0 = modes:1=0.2,2=-0.05
)";

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("chc_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("experiment kinds") {
    for (auto k : {ExperimentKind::Simulate, ExperimentKind::Pair, ExperimentKind::Couple, ExperimentKind::Girsanov,
                   ExperimentKind::Asf, ExperimentKind::Ergodic, ExperimentKind::Irreducibility,
                   ExperimentKind::NSweep, ExperimentKind::LinTest})
        CHECK(parse_kind(to_string(k)) == k);
    CHECK_FALSE(parse_kind("bogus").has_value());
}

TEST_CASE("configuration parsing") {
    const ExperimentConfig c = parse_config_text(kMinimal);
    CHECK(c.kind == ExperimentKind::Simulate);
    CHECK(c.sim.M == 8);
    CHECK(c.sim.cov.b[2] == 0.5);
    CHECK(c.sim.cov.band == 2);
    CHECK(c.sim.potential == PotentialSpec::truncated(1.0, 4));
    CHECK(c.x0.kind == InitialSpec::Kind::Modes);

    SECTION("round trip through the canonical form") {
        CHECK(parse_config_text(emit_config(c)) == c);
        ExperimentConfig e = parse_config_text(std::string(kMinimal) + "potential = exact\nlambda = 0.5\n");
        CHECK(parse_config_text(emit_config(e)) == e);
        CHECK(config_hash(e) != config_hash(c));
        CHECK(config_hash(parse_config_text(emit_config(c))) == config_hash(c));
    }
    SECTION("diagnostics name the offending field") {
        auto field_of = [](const std::string& text) {
            try {
                parse_config_text(text);
            } catch (const ConfigError& e) {
                return e.field();
            }
            return std::string("<none>");
        };
        CHECK(field_of(std::string(kMinimal) + "b = 0:1.0\n") == "b[0]");
        CHECK(field_of("M = 8\nb = 1:1.0\nN = 2\n") == "b[2]");
        CHECK(field_of(std::string(kMinimal) + "colour = red\n") == "colour");
        CHECK(field_of(std::string(kMinimal) + "M = 9\n") == "M");
        CHECK(field_of(std::string(kMinimal) + "potential = cubic\n") == "potential");
        CHECK(field_of("M = 4\nb = 7:1.0\n") == "b[7]");
        CHECK(field_of("M = 4\ndt = fast\n") == "dt");
        CHECK(field_of("kind = couple\nM = 8\nb = 1:1\nN = 1\n") == "y0");
        CHECK(field_of("kind = ergodic\nM = 8\nstart = constant\n") == "start");
        CHECK(field_of("kind = asf\nM = 8\nb = 1:1\nN = 1\ny0 = constant\ndt = 1e-3\nt = 0.00015\n") == "t");
        CHECK(field_of("kind = ergodic\nM = 8\nb = 1:1\nN = 1\nT = 0.05\nstart = constant\nstart = constant\n"
                       "observable = mean\n") == "burn_in");
        CHECK(field_of("kind = lintest\nM = 4\nreplicas = 10\n") == "potential");
        CHECK(field_of("M = 4\nno equals sign\n").find("<config>:2") == 0);
    }
    SECTION("requested kind") {
        CHECK(parse_config_text("M = 4\ny0 = constant\n", "<c>", ExperimentKind::Pair).kind == ExperimentKind::Pair);
        CHECK_THROWS_AS(parse_config_text("kind = pair\nM = 4\ny0 = constant\n", "<c>", ExperimentKind::Couple),
                        ConfigError);
    }
    SECTION("initial states and observables") {
        const InitialSpec g = InitialSpec::parse("gaussian:0.5");
        CHECK(g.kind == InitialSpec::Kind::Gaussian);
        CHECK(InitialSpec::parse(g.str()) == g);
        SimConfig s = c.sim;
        s.c = 0.1;
        const ModeVector x = c.x0.build(s, 0);
        CHECK(x[0] == 0.1);
        CHECK(x[1] == 0.2);
        CHECK(x[2] == -0.05);
        CHECK(g.build(s, 1) != g.build(s, 2));
        CHECK(parse_observable("seminorm(-1)").gamma == -1.0);
        CHECK(parse_observable("mode_moment(2,3)").power == 3);
        CHECK(parse_observable("tanh_e1").bounded_lipschitz());
        CHECK_THROWS(parse_observable("entropy"));
    }
}

TEST_CASE("FNV-1a") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("runs write reproducible artifacts") {
    ExperimentConfig c = parse_config_text(kMinimal);
    c.out = scratch_dir("runs").string();
    c.replicas = 4;
    const RunManifest a = run(c);
    const RunManifest b = run(c, RunOptions{2});
    CHECK(a.status == "ok");
    CHECK(a.exit_code == 0);
    CHECK(a.directory != b.directory);
    CHECK(a.directory.filename().string() == a.config_hash.substr(0, 12));
    CHECK(b.directory.filename().string() == a.config_hash.substr(0, 12) + "-1");
    CHECK(a.stream_keys.size() == 4);
    for (const auto& f : a.outputs) {
        REQUIRE(fs::exists(a.directory / f));
        CHECK(slurp(a.directory / f) == slurp(b.directory / f));
    }
    CHECK(fs::exists(a.directory / "manifest.json"));
    CHECK(fs::exists(a.directory / "ensemble.csv"));
    CHECK(parse_config(a.directory / "config.txt") == c);

    const fs::path plot = emit_plotdata(a.directory / "manifest.json", "norm_m1_sq_mean");
    CHECK(slurp(plot).rfind("t,norm_m1_sq_mean,log10_norm_m1_sq_mean,gronwall_envelope", 0) == 0);
    CHECK_THROWS(emit_plotdata(a.directory / "manifest.json", "no_such_series"));
    std::istringstream mean_plot(slurp(emit_plotdata(a.directory / "manifest.json", "mean")));
    std::string line;
    std::getline(mean_plot, line);
    CHECK(line == "t,mean,log10_mean");
    std::size_t rows = 0;
    while (std::getline(mean_plot, line)) {
        const auto first = line.find(','), second = line.find(',', first + 1);
        CHECK(std::stod(line.substr(first + 1, second - first - 1)) == 0.0);
        ++rows;
    }
    CHECK(rows > 1);
    fs::remove_all(c.out);
}

TEST_CASE("every kind runs on a small configuration") {
    const fs::path root = scratch_dir("kinds");
    const std::string common = "M = 8\ndt = 1e-4\nT = 0.02\nb = 1:1.0\nb = 2:1.0\nN = 2\nout = " + root.string() +
                               "\nx0 = modes:1=0.2\n";
    const std::vector<std::pair<std::string, std::string>> cases{
        {"pair", "y0 = modes:1=-0.2\n"},
        {"couple", "y0 = modes:1=-0.2\n"},
        {"girsanov", "y0 = modes:1=0.1\nreplicas = 8\n"},
        {"asf", "y0 = modes:1=0.1\nreplicas = 8\nt = 0.01\nt = 0.02\n"},
        {"ergodic", "start = modes:1=0.2\nstart = modes:1=-0.2\nobservable = seminorm(-1)\nburn_in = 0.005\n"},
        {"irreducibility", "start = constant\nstart = modes:1=0.3\nt = 0.02\nradius = 0.1\nreplicas = 16\n"},
        {"nsweep", "t = 0.02\nsweep_n = 1\nsweep_n = 2\nobservable = seminorm(-1)\nreplicas = 8\n"},
        {"lintest", "potential = disabled\nreplicas = 200\n"},
    };
    for (const auto& [kind, extra] : cases) {
        CAPTURE(kind);
        const ExperimentConfig c = parse_config_text("kind = " + kind + "\n" + common + extra);
        const RunManifest m = run(c);
        CHECK(m.kind == kind);
        CHECK(m.exit_code != kExitStiff);
        CHECK(fs::exists(m.directory / "manifest.json"));
        CHECK(fs::exists(m.directory / "summary.json"));
    }
    fs::remove_all(root);
}
