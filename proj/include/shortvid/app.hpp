#pragma once

// Scenario runner behind the command line tool: config loading with flat
// overrides, per-module report sections, report comparison and atomic output.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace shortvid::app {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kConfigDirEnv = "SHORTVID_CONFIG_DIR";

struct Scenario {
    nlohmann::json config;
    std::string path;
    std::string base_dir;     ///< relative references resolve against this
    std::string config_hash;  ///< FNV-1a of the config file bytes
    std::string effective_hash; ///< FNV-1a of the canonical config after overrides
    std::uint64_t seed = 0;
    std::vector<std::string> overrides;
};

/// `--config` value resolution: as given, then under $SHORTVID_CONFIG_DIR; an
/// empty name means demo.json in that directory (or ./config).
std::string resolve_config_path(const std::string& name);

/// Throws ConfigError on unreadable files, bad JSON, a missing seed or a bad override.
Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides,
                       std::optional<std::uint64_t> seed);

/// `a.b.0.c=value`; value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

std::string hex64(std::uint64_t v);

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string text() const;
};

struct RunOutput {
    nlohmann::json report;
    std::map<std::string, Csv> series; ///< file stem -> table
};

inline const std::vector<std::string> kSections{"playback", "cdn", "delivery", "uiae", "publish", "experiment"};

/// Runs one section or "full". Infeasible and other module errors propagate.
RunOutput run_scenario(const Scenario& s, const std::string& subcommand);

/// Per-metric deltas between two reports; throws ConfigError on schema mismatch.
nlohmann::json compare_runs(const nlohmann::json& a, const nlohmann::json& b);

/// Forecast of a one-column (or t,value) CSV series.
nlohmann::json forecast_csv(const std::string& csv_path, const std::string& method, int window, int horizon,
                            int period);

/// Writes through a temp file in the same directory and renames it into place.
void write_atomic(const std::string& path, const std::string& content);

} // namespace shortvid::app
