#include "bicouple/cli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "bicouple/cli/registry.hpp"

namespace bicouple::cli {

namespace {

using nlohmann::json;

json scalar_to_json(const YAML::Node& node) {
    const std::string& text = node.Scalar();
    if (node.Tag() == "!") return text;  // quoted
    if (text == "~" || text == "null" || text == "Null" || text == "NULL") return nullptr;
    if (text == "true" || text == "True" || text == "TRUE") return true;
    if (text == "false" || text == "False" || text == "FALSE") return false;
    if (!text.empty()) {
        std::size_t used = 0;
        try {
            const long long i = std::stoll(text, &used);
            if (used == text.size()) return i;
        } catch (const std::exception&) {
        }
        try {
            const double d = std::stod(text, &used);
            if (used == text.size()) return d;
        } catch (const std::exception&) {
        }
    }
    return text;
}

json to_json(const YAML::Node& node, const std::string& path, std::map<std::string, int>& lines) {
    if (!path.empty()) lines[path] = node.Mark().line + 1;
    switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Scalar: return scalar_to_json(node);
    case YAML::NodeType::Sequence: {
        json out = json::array();
        std::size_t i = 0;
        for (const auto& item : node) out.push_back(to_json(item, path + "[" + std::to_string(i++) + "]", lines));
        return out;
    }
    case YAML::NodeType::Map: {
        json out = json::object();
        for (const auto& kv : node) {
            const std::string key = kv.first.as<std::string>();
            out[key] = to_json(kv.second, path.empty() ? key : path + "." + key, lines);
        }
        return out;
    }
    }
    return nullptr;
}

YAML::Node load_yaml(const std::string& text, const std::string& source) {
    try {
        return YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": malformed config: " + e.msg);
    }
}

std::vector<std::string> split_path(const std::string& key) {
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        parts.push_back(part);
    }
    if (parts.empty()) throw ConfigError("override needs a key");
    return parts;
}

void set_top_level(RunConfig& c, const std::string& key, const json& value, const std::string& where) {
    if (key == "experiment") {
        if (!value.is_string()) throw ConfigError(where + "field 'experiment' must be a string");
        c.experiment = value.get<std::string>();
    } else if (key == "seed") {
        if (!value.is_number_integer() || value.get<long long>() < 0)
            throw ConfigError(where + "field 'seed' must be a nonnegative integer");
        c.seed = value.get<std::uint64_t>();
    } else if (key == "output") {
        if (!value.is_string()) throw ConfigError(where + "field 'output' must be a path string");
        c.output = value.get<std::string>();
    } else if (key == "formats") {
        const json list = value.is_string() ? json::array({value}) : value;
        if (!list.is_array()) throw ConfigError(where + "field 'formats' must be a list");
        c.formats.clear();
        for (const auto& f : list) {
            if (!f.is_string() || (f != "json" && f != "csv"))
                throw ConfigError(where + "field 'formats' accepts only json and csv");
            c.formats.push_back(f.get<std::string>());
        }
    } else if (key == "params") {
        if (!value.is_object()) throw ConfigError(where + "field 'params' must be a mapping");
        c.params = value;
    } else {
        throw ConfigError(where + "unknown field '" + key + "'");
    }
}

} // namespace

std::string RunConfig::where(const std::string& key) const {
    const auto it = lines.find(key);
    if (it == lines.end()) return source + ": ";
    return source + ":" + std::to_string(it->second) + ": ";
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    RunConfig c;
    c.source = source;
    const YAML::Node root = load_yaml(text, source);
    if (root.IsNull()) return c;
    if (!root.IsMap()) throw ConfigError(source + ":1: config must be a mapping of fields");
    const json doc = to_json(root, "", c.lines);
    for (const auto& [key, value] : doc.items()) set_top_level(c, key, value, c.where(key));
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.string());
}

void apply_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    std::vector<std::string> parts = split_path(assignment.substr(0, eq));
    std::map<std::string, int> ignored;
    const json value = to_json(load_yaml(assignment.substr(eq + 1), "--set " + parts.front()), "", ignored);
    const std::string where = "--set " + assignment.substr(0, eq) + ": ";
    if (parts.size() == 1 && (parts[0] == "experiment" || parts[0] == "seed" || parts[0] == "output" ||
                              parts[0] == "formats")) {
        set_top_level(config, parts[0], value, where);
        return;
    }
    if (parts.front() == "params") parts.erase(parts.begin());
    if (parts.empty()) {
        set_top_level(config, "params", value, where);
        return;
    }
    json* node = &config.params;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        json& next = (*node)[parts[i]];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) throw ConfigError(where + "'" + parts[i] + "' is not a mapping");
        node = &next;
    }
    (*node)[parts.back()] = value;
}

RunConfig finalize(const RunConfig& config) {
    if (config.experiment.empty()) throw ConfigError(config.where("experiment") + "no experiment given");
    const Experiment* e = find_experiment(config.experiment);
    if (!e) {
        std::string names;
        for (const auto& x : experiments()) names += (names.empty() ? "" : ", ") + x.name;
        throw ConfigError(config.where("experiment") + "unknown experiment '" + config.experiment +
                          "' (known: " + names + ")");
    }
    RunConfig out = config;
    json filled = json::object();
    for (const auto& [key, value] : config.params.items()) {
        const bool known = std::any_of(e->params.begin(), e->params.end(), [&](const ParamSpec& p) { return p.name == key; });
        if (!known) throw ConfigError(config.where("params." + key) + "experiment '" + e->name + "' has no parameter '" + key + "'");
    }
    for (const auto& p : e->params) {
        const std::string key = "params." + p.name;
        if (config.params.contains(p.name) && !config.params[p.name].is_null()) {
            const std::string problem = check_value(p, config.params[p.name]);
            if (!problem.empty()) throw ConfigError(config.where(key) + "field '" + key + "': " + problem);
            filled[p.name] = config.params[p.name];
        } else if (!p.default_value.is_null()) {
            filled[p.name] = p.default_value;
        }
    }
    out.params = std::move(filled);
    return out;
}

std::filesystem::path default_output_root() {
    if (const char* root = std::getenv("BICOUPLE_OUTPUT_ROOT"); root && *root) return root;
    return "results";
}

RunOutcome run(const RunConfig& config) {
    const Experiment* e = find_experiment(config.experiment);
    if (!e) throw ConfigError("unknown experiment '" + config.experiment + "'");
    RunOutcome outcome;
    try {
        outcome.report = e->run(config.params, config.seed);
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& ex) {
        throw ConfigError(config.source + ": invalid parameters for '" + e->name + "': " + ex.what());
    } catch (const DimensionMismatch& ex) {
        throw ConfigError(config.source + ": inconsistent dimensions for '" + e->name + "': " + ex.what());
    } catch (const InvalidMeasure& ex) {
        throw ConfigError(config.source + ": invalid law for '" + e->name + "': " + ex.what());
    }
    auto& report = outcome.report;
    report.seed = config.seed;
    report.timestamp = utc_timestamp();

    const std::filesystem::path dir = config.output.value_or(default_output_root() / e->name);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    for (const auto& format : config.formats) {
        const std::filesystem::path file = dir / (e->name + "." + format);
        std::ofstream out(file);
        if (!out) throw Error("cannot write " + file.string());
        if (format == "json")
            out << bicouple::to_json(report).dump(2) << '\n';
        else
            write_series_csv(out, report);
        out.close();
        if (!out) throw Error("write failed for " + file.string());
        outcome.files.push_back(file);
    }
    return outcome;
}

} // namespace bicouple::cli
