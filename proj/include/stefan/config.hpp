#pragma once

#include "stefan/controller.hpp"
#include "stefan/model.hpp"
#include "stefan/solver.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace stefan {

inline constexpr int config_schema_version = 1;

/// Units the config values are written in. Everything is converted to SI by
/// `to_si` before it reaches the model.
enum class UnitSystem { SI, Centimetre };

struct RunConfig {
    int schema_version = config_schema_version;
    UnitSystem units = UnitSystem::SI;
    Order order = Order::Second;
    PhysicalParams physical;
    InitialData initial;
    ControlGains gains;
    SetpointRelaxation relaxation = SetpointRelaxation::Eps1;
    ControllerMode mode = ClosedLoop{};
    SolverConfig solver;
    /// Empty means the directory given on the command line.
    std::string output_dir;
    /// Every n-th record is written to the trajectory CSV (the last one always is).
    int record_every = 1;

    bool operator==(const RunConfig&) const = default;
};

/// Raw `section.key -> value` entries with the line they came from.
struct ConfigEntries {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, Entry> values;

    /// Replaces or adds a value; the key must be one the grammar knows.
    void set(const std::string& key, const std::string& value);
};

/// Tokenizes the text. Throws ConfigError on malformed lines, unknown
/// sections or keys and duplicates.
ConfigEntries parse_entries(std::string_view text);

/// Builds and structurally checks a config. Throws ConfigError.
RunConfig build_config(const ConfigEntries& entries);

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& config);

/// Same config expressed in SI units.
RunConfig to_si(const RunConfig& config);

bool is_known_key(const std::string& key);

const char* to_string(UnitSystem units);
const char* to_string(SetpointRelaxation relaxation);

/// %.17g rendering shared by the config, CSV and summary writers.
std::string format_double(double value);

} // namespace stefan
