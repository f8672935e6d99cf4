#pragma once
//
// Named experiments driven by flat key=value configuration files.
//
//   # comment
//   kind = couple
//   M = 16
//   b = 1:1.0          (repeated key: one (k, b_k) pair per line)
//   b = 2:1.0
//   N = 2
//   x0 = modes:1=0.2,2=-0.05
//
// Each run writes into <out>/<config-hash prefix>/ and finishes by writing
// manifest.json.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chc/dynamics.hpp"
#include "chc/ergodics.hpp"

namespace chc {

enum class ExperimentKind { Simulate, Pair, Couple, Girsanov, Asf, Ergodic, Irreducibility, NSweep, LinTest };

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(std::string_view name);

/// Configuration problem; field() names the offending key (e.g. "b[0]").
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Initial state recipe:
///   constant              c e_0
///   gaussian:<s>          c e_0 + s·(draw of μ_c without its mean)
///   modes:k=v,k=v,...     c e_0 + Σ v e_k
struct InitialSpec {
    enum class Kind { Constant, Gaussian, Modes };

    Kind kind = Kind::Constant;
    double scale = 0.0;
    std::vector<std::pair<std::size_t, double>> modes;

    static InitialSpec parse(std::string_view text);
    std::string str() const;
    /// `index` selects the μ_c draw for Gaussian starts.
    ModeVector build(const SimConfig& cfg, std::uint64_t index) const;

    friend bool operator==(const InitialSpec&, const InitialSpec&) = default;
};

/// mean | sup_norm | energy | seminorm(γ) | mode_moment(k,p) | tanh_e1
ObservableSpec parse_observable(std::string_view text);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Simulate;
    SimConfig sim;
    std::size_t replicas = 1;
    InitialSpec x0;
    std::optional<InitialSpec> y0;
    std::vector<InitialSpec> starts;
    std::vector<double> times;
    std::vector<std::string> observables;
    std::vector<int> sweep_n;
    std::vector<double> radii;
    double burn_in = -1.0;
    std::string out = "runs";

    /// Throws ConfigError for kind-specific requirements.
    void validate() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// `requested` supplies the kind when the text has no kind key; a different
/// declared kind is a ConfigError.
ExperimentConfig parse_config_text(std::string_view text, const std::string& source = "<config>",
                                   std::optional<ExperimentKind> requested = std::nullopt);
ExperimentConfig parse_config(const std::filesystem::path& path,
                              std::optional<ExperimentKind> requested = std::nullopt);
/// Canonical text with every default written out; parse_config_text(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& cfg);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct RunManifest {
    std::string kind;
    std::string config_hash;
    std::string code_version;
    double wall_clock_seconds = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> stream_keys;
    std::filesystem::path directory;
    std::vector<std::string> outputs;
    std::vector<std::string> failures;
    std::string status;  // "ok", "assertion-failed" or "stiff-event"
    int exit_code = 0;
};

inline constexpr int kExitConfig = 2;
inline constexpr int kExitStiff = 3;
inline constexpr int kExitAssertion = 4;

struct RunOptions {
    std::size_t threads = 1;
};

/// Runs the experiment, writes its artifacts and manifest.json.
RunManifest run(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Writes plot_<series>.csv next to the manifest: t, the series, and log10 of
/// it when positive (plus the Gronwall envelope for ensemble |X|²_{-1}).
std::filesystem::path emit_plotdata(const std::filesystem::path& manifest, const std::string& series);

}  // namespace chc
