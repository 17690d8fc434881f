#pragma once

// Experiment orchestration: JSON configs, hashing, per-kind runners writing
// CSV outputs and a report.json with the config hash, seed and version.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbn/fit.hpp"

namespace rbn::xlab {

using Json = nlohmann::json;

enum class ExperimentKind {
    fbm_validate,
    regime_table,
    variation_scaling,
    localtime_exponents,
    skew_legall,
    sewing_rates,
    counterexample_sweep
};

std::string to_string(ExperimentKind k);
/// Throws DomainError on an unknown name.
ExperimentKind parse_kind(const std::string& name);
const std::vector<ExperimentKind>& all_kinds();

std::string software_version();

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::fbm_validate;
    std::uint64_t seed = 1;
    std::optional<std::size_t> n_paths;  ///< overrides every section's ensemble size
    std::optional<std::size_t> n_steps;  ///< overrides every section's time-grid size
    unsigned threads = 0;     ///< 0: hardware concurrency; never affects outputs
    std::string out = "out";
    Json params = Json::object();  ///< kind-specific sections
};

/// Built-in defaults for a kind (the committed example configs).
ExperimentConfig default_config(ExperimentKind kind);
/// Parses a config document; keys absent from `params` fall back to defaults.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& file);
Json to_json(const ExperimentConfig& cfg);
/// Hex SHA-256 of the canonical JSON of the config, excluding `out` and `threads`.
std::string config_hash(const ExperimentConfig& cfg);
/// Checks parameter ranges and classifies every referenced (h, d, p) regime.
/// Throws DomainError or RegimeRefusal.
void validate_config(const ExperimentConfig& cfg);

struct ExperimentReport {
    ExperimentKind kind = ExperimentKind::fbm_validate;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version;
    Json summary = Json::object();  ///< measured values and "gates" (name -> bool)
    std::vector<std::string> files; ///< written outputs relative to cfg.out
    Json to_json() const;
    bool all_gates_pass() const;
};

/// Validates, runs and writes CSVs plus report.json into cfg.out.
/// RegimeRefusal and NumericalFailure propagate.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Exit code for the CLI: 0 success, 2 regime refusal, 3 numerical failure.
enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_regime = 2, exit_numerical = 3 };

}  // namespace rbn::xlab
