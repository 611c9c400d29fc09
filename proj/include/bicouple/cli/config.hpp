#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "../error.hpp"
#include "../report.hpp"

namespace bicouple::cli {

class ConfigError : public Error {
public:
    using Error::Error;
};

/// One experiment invocation. `params` holds only what the user wrote until
/// `finalize` fills defaults and checks types and ranges.
struct RunConfig {
    std::string experiment;
    nlohmann::json params = nlohmann::json::object();
    std::uint64_t seed = 1;
    std::optional<std::filesystem::path> output;
    std::vector<std::string> formats{"json", "csv"};
    std::string source = "<flags>";
    std::map<std::string, int> lines;  ///< dotted key -> 1-based line in the source

    /// "source:line: " for a known key, "source: " otherwise.
    std::string where(const std::string& key) const;
};

/// Parses a YAML document with top-level keys experiment, seed, output,
/// formats and params.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// key=value; key is a dotted path inside params (a leading "params." is
/// optional) or one of experiment, seed, output, formats. The value is read
/// as YAML, so lists and maps are allowed.
void apply_override(RunConfig& config, const std::string& assignment);

/// Checks the experiment name and parameters and fills defaults.
RunConfig finalize(const RunConfig& config);

/// Default output root: $BICOUPLE_OUTPUT_ROOT, else "results".
std::filesystem::path default_output_root();

struct RunOutcome {
    ExperimentReport report;
    std::vector<std::filesystem::path> files;
};

/// Runs a finalized config and writes <output>/<experiment>.json and .csv.
RunOutcome run(const RunConfig& config);

} // namespace bicouple::cli
