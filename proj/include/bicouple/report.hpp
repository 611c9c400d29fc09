#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "extended_real.hpp"

namespace bicouple {

enum class Verdict { holds, violated, degenerate, divergent };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

/// holds iff left <= right + tolerance with both sides finite; an infinite
/// right side is a vacuous (degenerate) pass; an infinite left side against
/// a finite right side is a violation.
Verdict judge(ExtendedReal left, ExtendedReal right, double tolerance);

/// Plot-ready data: one row per grid value.
struct ReportSeries {
    std::string grid_name = "t";
    std::vector<double> grid, left, right;
};

/// Named inequality check "left <= right".
struct ExperimentReport {
    std::string name;
    nlohmann::json params = nlohmann::json::object();
    ExtendedReal left;
    ExtendedReal right;
    double tolerance = 0.0;
    Verdict verdict = Verdict::holds;
    std::vector<std::string> notes;
    std::uint64_t seed = 0;
    std::string timestamp;
    std::optional<ReportSeries> series;

    /// right - left as an IEEE double (+/-inf where one side is infinite).
    double margin() const;

    /// Verdict is reproducible from (left, right, tolerance) for holds and
    /// violated; degenerate and divergent carry all-finite-or-not freely.
    bool consistent() const;
};

/// Report with verdict = judge(left, right, tolerance).
ExperimentReport make_report(std::string name, ExtendedReal left, ExtendedReal right, double tolerance);

/// Serialises as {name, params, left, right, margin, tolerance, verdict,
/// notes, seed, timestamp}; infinities are written as the strings "inf"/"-inf".
nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

/// Structural check against the published report schema; returns the list
/// of problems (empty when valid).
std::vector<std::string> validate_report_json(const nlohmann::json& j);

/// grid,left,right rows (empty body when the report has no series).
void write_series_csv(std::ostream& os, const ExperimentReport& r);

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

} // namespace bicouple
