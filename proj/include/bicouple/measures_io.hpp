#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "measures.hpp"

namespace bicouple {

/// {dim, points: [[...], ...], weights: [...]}
nlohmann::json to_json(const Empirical& m);
Empirical empirical_from_json(const nlohmann::json& j);

/// One point per row with header x1..xd,weight.
void write_csv(std::ostream& os, const Empirical& m);

/// Reads a CSV written by write_csv. Headerless files are accepted too; then
/// a column beyond `dim` (when given) is read as the weight column.
Empirical read_empirical_csv(std::istream& is, std::optional<Eigen::Index> dim = std::nullopt);

} // namespace bicouple
