#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "numeraire/diagnostics.hpp"
#include "numeraire/error.hpp"

namespace numeraire {

inline constexpr const char* kVersion = "1.0.0";

// A configuration problem, tagged with the offending field (dotted path).
class ConfigError : public InputError {
public:
    ConfigError(std::string field, const std::string& message)
        : InputError(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class ScenarioKind { Tree, TreeSequence, Diffusion, Lognormal };
std::string to_string(ScenarioKind k);

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::Tree;
    nlohmann::json raw;                  // the document as read
    std::filesystem::path base_dir;      // relative input paths resolve here

    std::vector<double> m_grid;
    std::vector<double> alpha_grid;
    std::vector<double> delta_grid;
    std::vector<int> n_list;

    bool has_mc = false;
    int mc_paths = 0;
    int mc_steps = 0;
    std::uint64_t seed = 0;

    Policy policy;
    std::filesystem::path output_dir = "out";
    bool plotdata = true;

    // Kind-specific block, validated.
    nlohmann::json model;
};

// Parses and validates. Throws ConfigError naming the field.
ScenarioConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
// Reads the file first; syntax errors carry line and column.
ScenarioConfig load_config(const std::filesystem::path& path);

// 64-bit FNV-1a of the compact serialization, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

struct RunResult {
    int exit_code = 0;  // 0 success, 2 configuration error, 3 numerical failure
    std::string message;
    nlohmann::json report;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

// Runs the scenario and writes report.json and curves.csv (plus plot data
// when enabled) into out_dir, or the configured directory. threads <= 0
// leaves the OpenMP default. Never throws for configuration or numerical
// problems; those become exit codes.
RunResult run_scenario(const ScenarioConfig& cfg, const std::optional<std::filesystem::path>& out_dir = {},
                       int threads = 0);

struct PlotdataSummary {
    std::size_t tail_rows = 0;
    std::size_t hellinger_rows = 0;
    std::size_t np_rows = 0;
    // Per n: whether E V^-alpha is non-increasing along the alpha grid.
    // Informational only: the map alpha -> E V^-alpha is log-convex and need
    // not be monotone.
    std::vector<bool> hellinger_monotone;
};

// tail_curve.csv     n,M,probability,se
// hellinger_curve.csv n,alpha,value,se
// np_profile.csv     n,delta,power
// Files are written even when a curve is empty (header only). Throws
// NumericalError if a Hellinger value lies outside (0, 1] beyond 3 standard
// errors, and std::runtime_error if the directory is not writable.
PlotdataSummary emit_plotdata(const SequenceDiagnostics& diag, const std::filesystem::path& dir);

}  // namespace numeraire
