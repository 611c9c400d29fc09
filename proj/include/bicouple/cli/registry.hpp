#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "../report.hpp"

namespace bicouple::cli {

/// Declared parameter of an experiment. Types: real, integer, bool, vector,
/// matrix, real_list, field, law, list. A null default marks an optional
/// parameter that is absent unless given.
struct ParamSpec {
    std::string name;
    std::string type;
    nlohmann::json default_value;
    std::string description;
    std::optional<double> minimum;
    std::optional<double> exclusive_minimum;
    std::optional<double> maximum;
};

struct Experiment {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;
    std::function<ExperimentReport(const nlohmann::json& params, std::uint64_t seed)> run;
};

const std::vector<Experiment>& experiments();
const Experiment* find_experiment(std::string_view name);

/// JSON schema of the experiment's parameter record.
nlohmann::json parameter_schema(const Experiment& e);

/// Type and range problem for one value, or an empty string.
std::string check_value(const ParamSpec& spec, const nlohmann::json& value);

} // namespace bicouple::cli
