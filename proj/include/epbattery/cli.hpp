#pragma once

// =============================================================================
// Command-line front end: JSON run configurations, subcommand dispatch and
// CSV/JSON table output.
// =============================================================================

#include "epbattery/integrator.hpp"
#include "epbattery/model.hpp"
#include "epbattery/sweep.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace epbattery::cli {

/// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,  // I/O or unexpected failure
    kExitConfig = 2,
    kExitDomain = 3,
    kExitTolerance = 4,
};

/// Malformed or inconsistent configuration (exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OutputFormat { Csv, Json };

[[nodiscard]] std::string_view to_string(OutputFormat f) noexcept;
/// Throws ConfigError for anything other than "csv" or "json".
[[nodiscard]] OutputFormat parse_format(std::string_view s);

// =============================================================================
// Subcommand blocks
// =============================================================================

struct SpectrumConfig {
    double gamma_b = 0.5;
    double alpha = 0.0;
    Range delta_r{-2.0, 2.0, 401};

    friend bool operator==(const SpectrumConfig&, const SpectrumConfig&) = default;
};

struct DynamicsConfig {
    /// "single" (one reduced parameter set), "panel" (several (delta_r, alpha)
    /// points at fixed gamma_b), "quench" (piecewise-constant reduced
    /// parameters) or "full" (three-mode model, physical time).
    std::string kind = "single";
    /// single only: "closed_form" or "rk4".
    std::string method = "closed_form";
    double t_end = 20.0;
    double dt = 0.01;
    /// single and quench: divide t by gamma_eff and multiply power by it.
    bool physical_time = false;

    ReducedParams params = ReducedParams::symmetric(0.5, 0.0);

    double gamma_b = 0.5;
    double eps_r = 1.0;
    std::vector<PlanePoint> points;

    std::vector<QuenchSegment> segments;

    PhysicalParams physical;

    friend bool operator==(const DynamicsConfig&, const DynamicsConfig&) = default;
};

struct PhaseDiagramConfig {
    double gamma_b = 0.5;
    Range delta_r = default_delta_range();
    Range alpha = default_alpha_range(0.5);

    friend bool operator==(const PhaseDiagramConfig&, const PhaseDiagramConfig&) = default;
};

struct TcritConfig {
    double gamma_b = 0.5;
    double e_max = 1000.0;
    Range delta_r{-1.5, 1.5, 601};

    friend bool operator==(const TcritConfig&, const TcritConfig&) = default;
};

struct ValidateConfig {
    ReducedParams target{1.5, 1.5, 0.5, 1.0, 1.0};
    std::vector<double> ratios{10.0, 30.0, 100.0};
    double t_end = 5.0;   // rescaled time
    double dt = 0.01;     // rescaled output spacing
    /// Bound on the final-time relative error at the largest ratio.
    std::optional<double> max_rel_error = 0.05;
    /// Require the final-time error to fall strictly as the ratio grows.
    bool require_decreasing = true;

    friend bool operator==(const ValidateConfig&, const ValidateConfig&) = default;
};

using CommandBlock = std::variant<SpectrumConfig, DynamicsConfig, PhaseDiagramConfig, TcritConfig, ValidateConfig>;

struct RunConfig {
    CommandBlock block;
    std::string output;   // empty: write the main table to stdout
    OutputFormat format = OutputFormat::Csv;
    unsigned threads = 1; // 0: hardware concurrency

    /// "spectrum", "dynamics", "phase-diagram", "tcrit" or "validate".
    [[nodiscard]] std::string_view command() const noexcept;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Default configuration for a subcommand name. Throws ConfigError for an unknown name.
[[nodiscard]] RunConfig default_config(std::string_view command);

[[nodiscard]] nlohmann::json to_json(const RunConfig& cfg);

/// Throws ConfigError on unknown keys, wrong types or an unknown command.
/// Missing keys keep their defaults.
[[nodiscard]] RunConfig from_json(const nlohmann::json& j);

/// Parses JSON text; syntax errors become ConfigError.
[[nodiscard]] RunConfig parse_config(std::string_view text);

[[nodiscard]] RunConfig load_config(const std::string& path);

// =============================================================================
// Results
// =============================================================================

/// Column-ordered table. Cells are JSON scalars: numbers, strings or null
/// (written as "nan" in CSV).
struct Table {
    std::vector<std::string> columns;
    std::vector<nlohmann::json> rows;  // each an array of columns.size() cells

    void write_csv(std::ostream& os) const;
    [[nodiscard]] nlohmann::json to_json() const;
};

struct CommandResult {
    Table table;
    /// Secondary tables, written to "<output>.<name>.csv" in CSV mode.
    std::vector<std::pair<std::string, Table>> extras;
    /// Written to "<output>.meta.json" in CSV mode.
    nlohmann::json meta = nlohmann::json::object();
    int exit_code = kExitOk;
    std::string violation;  // set when exit_code == kExitTolerance
};

/// Runs the computation without writing anything. Domain errors propagate as
/// epbattery::Error.
[[nodiscard]] CommandResult run_command(const RunConfig& cfg);

/// Runs and writes outputs. Errors are reported as one JSON line on `err` and
/// mapped to exit codes; `out` receives the main table when cfg.output is empty.
int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err);

int cmd_spectrum(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_dynamics(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_phase_diagram(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_tcrit(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Entry point: `epbattery <subcommand> [--config PATH] [--out PATH]
/// [--format csv|json] [--threads N]`. Flags override config values.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace epbattery::cli
