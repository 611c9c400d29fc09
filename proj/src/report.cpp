#include "bicouple/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace bicouple {

namespace {

nlohmann::json number_to_json(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double number_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw InvalidArgument("unexpected numeric string '" + s + "'");
    }
    return j.get<double>();
}

ExtendedReal extended_from_json(const nlohmann::json& j) {
    const double v = number_from_json(j);
    if (std::isinf(v) && v > 0) return ExtendedReal::infinity();
    if (!std::isfinite(v)) throw InvalidArgument("report sides must be finite or +inf");
    return v;
}

bool is_number_like(const nlohmann::json& j, bool allow_null) {
    if (j.is_number()) return true;
    if (allow_null && j.is_null()) return true;
    return j.is_string() && (j.get<std::string>() == "inf" || j.get<std::string>() == "-inf");
}

} // namespace

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::degenerate: return "degenerate";
    case Verdict::divergent: return "divergent";
    }
    return "unknown";
}

Verdict verdict_from_string(std::string_view s) {
    if (s == "holds") return Verdict::holds;
    if (s == "violated") return Verdict::violated;
    if (s == "degenerate") return Verdict::degenerate;
    if (s == "divergent") return Verdict::divergent;
    throw InvalidArgument("unknown verdict '" + std::string(s) + "'");
}

Verdict judge(ExtendedReal left, ExtendedReal right, double tolerance) {
    if (right.is_infinite()) return Verdict::degenerate;
    if (left.is_infinite()) return Verdict::violated;
    return left.value() <= right.value() + tolerance ? Verdict::holds : Verdict::violated;
}

double ExperimentReport::margin() const { return right.as_double() - left.as_double(); }

bool ExperimentReport::consistent() const {
    if (verdict == Verdict::holds || verdict == Verdict::violated) {
        if (left.is_infinite() && right.is_finite()) return verdict == Verdict::violated;
        if (left.is_infinite() || right.is_infinite()) return false;
        return (verdict == Verdict::holds) == (left.value() <= right.value() + tolerance);
    }
    return true;
}

ExperimentReport make_report(std::string name, ExtendedReal left, ExtendedReal right, double tolerance) {
    ExperimentReport r;
    r.name = std::move(name);
    r.left = left;
    r.right = right;
    r.tolerance = tolerance;
    r.verdict = judge(left, right, tolerance);
    if (r.verdict == Verdict::degenerate) r.notes.emplace_back("right side is +inf; inequality holds vacuously");
    return r;
}

nlohmann::json to_json(const ExperimentReport& r) {
    return {{"name", r.name},
            {"params", r.params},
            {"left", number_to_json(r.left.as_double())},
            {"right", number_to_json(r.right.as_double())},
            {"margin", number_to_json(r.margin())},
            {"tolerance", r.tolerance},
            {"verdict", std::string(to_string(r.verdict))},
            {"notes", r.notes},
            {"seed", r.seed},
            {"timestamp", r.timestamp}};
}

ExperimentReport report_from_json(const nlohmann::json& j) {
    const auto problems = validate_report_json(j);
    if (!problems.empty()) throw InvalidArgument("invalid report JSON: " + problems.front());
    ExperimentReport r;
    r.name = j.at("name").get<std::string>();
    r.params = j.at("params");
    r.left = extended_from_json(j.at("left"));
    r.right = extended_from_json(j.at("right"));
    r.tolerance = j.at("tolerance").get<double>();
    r.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    r.notes = j.at("notes").get<std::vector<std::string>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.timestamp = j.at("timestamp").get<std::string>();
    return r;
}

std::vector<std::string> validate_report_json(const nlohmann::json& j) {
    static const std::vector<std::string> fields{"name",      "params", "left",  "right", "margin",
                                                 "tolerance", "verdict", "notes", "seed",  "timestamp"};
    if (!j.is_object()) return {"report must be a JSON object"};
    std::vector<std::string> problems;
    for (const auto& key : fields)
        if (!j.contains(key)) problems.push_back("missing field '" + key + "'");
    for (const auto& [key, value] : j.items())
        if (std::find(fields.begin(), fields.end(), key) == fields.end()) problems.push_back("unknown field '" + key + "'");
    const auto check = [&](const char* key, bool ok, const char* message) {
        if (j.contains(key) && !ok) problems.emplace_back(message);
    };
    const auto at = [&](const char* key) -> const nlohmann::json& {
        static const nlohmann::json null;
        return j.contains(key) ? j[key] : null;
    };
    check("name", at("name").is_string() && !at("name").get<std::string>().empty(), "'name' must be a nonempty string");
    check("params", at("params").is_object(), "'params' must be an object");
    check("left", is_number_like(at("left"), false), "'left' must be a number or \"inf\"");
    check("right", is_number_like(at("right"), false), "'right' must be a number or \"inf\"");
    check("margin", is_number_like(at("margin"), true), "'margin' must be a number, \"inf\", \"-inf\" or null");
    check("tolerance", at("tolerance").is_number() && at("tolerance").get<double>() >= 0.0,
          "'tolerance' must be a nonnegative number");
    const auto& verdict = at("verdict");
    check("verdict",
          verdict.is_string() && (verdict == "holds" || verdict == "violated" || verdict == "degenerate" || verdict == "divergent"),
          "'verdict' must be one of holds|violated|degenerate|divergent");
    const auto& notes = at("notes");
    check("notes", notes.is_array() && std::all_of(notes.begin(), notes.end(), [](const auto& n) { return n.is_string(); }),
          "'notes' must be an array of strings");
    check("seed", at("seed").is_number_unsigned(), "'seed' must be a nonnegative integer");
    check("timestamp", at("timestamp").is_string(), "'timestamp' must be a string");
    return problems;
}

void write_series_csv(std::ostream& os, const ExperimentReport& r) {
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    const std::string grid_name = r.series ? r.series->grid_name : "t";
    os << grid_name << ",left,right\n";
    if (r.series) {
        const auto& s = *r.series;
        for (std::size_t i = 0; i < s.grid.size(); ++i) os << s.grid[i] << ',' << s.left[i] << ',' << s.right[i] << '\n';
    }
    os.precision(old);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

} // namespace bicouple
