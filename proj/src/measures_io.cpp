#include "bicouple/measures_io.hpp"

#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

namespace bicouple {

nlohmann::json to_json(const Empirical& m) {
    nlohmann::json pts = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        auto p = m.point(i);
        pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    }
    const auto& w = m.weights();
    return {{"dim", m.dim()}, {"points", std::move(pts)}, {"weights", std::vector<double>(w.data(), w.data() + w.size())}};
}

Empirical empirical_from_json(const nlohmann::json& j) {
    if (!j.contains("points")) throw InvalidMeasure("empirical JSON lacks 'points'");
    std::vector<Vector> pts;
    for (const auto& row : j.at("points")) {
        auto v = row.get<std::vector<double>>();
        pts.emplace_back(Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    if (j.contains("dim") && !pts.empty() && j.at("dim").get<Eigen::Index>() != pts.front().size())
        throw DimensionMismatch("'dim' disagrees with point length");
    std::vector<double> w;
    if (j.contains("weights")) w = j.at("weights").get<std::vector<double>>();
    return empirical_from_points(pts, w);
}

void write_csv(std::ostream& os, const Empirical& m) {
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index k = 0; k < m.dim(); ++k) os << 'x' << (k + 1) << ',';
    os << "weight\n";
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        for (Eigen::Index k = 0; k < m.dim(); ++k) os << m.point(i)(k) << ',';
        os << m.weight(i) << '\n';
    }
    os.precision(old);
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    std::istringstream in(s);
    in >> out;
    return !in.fail() && (in >> std::ws).eof();
}

} // namespace

Empirical read_empirical_csv(std::istream& is, std::optional<Eigen::Index> dim) {
    std::string line;
    std::vector<std::vector<double>> rows;
    bool weight_column = false;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        std::vector<double> row(cells.size());
        bool numeric = true;
        for (std::size_t c = 0; c < cells.size(); ++c) numeric = numeric && parse_double(cells[c], row[c]);
        if (first && !numeric) {
            weight_column = !cells.empty() && cells.back() == "weight";
            first = false;
            continue;
        }
        first = false;
        if (!numeric) throw InvalidMeasure("non-numeric CSV cell on line " + std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidMeasure("CSV holds no points");
    const auto width = static_cast<Eigen::Index>(rows.front().size());
    if (dim && width == *dim + 1) weight_column = true;
    const Eigen::Index d = weight_column ? width - 1 : width;
    std::vector<Vector> pts;
    std::vector<double> w;
    for (const auto& r : rows) {
        if (static_cast<Eigen::Index>(r.size()) != width) throw DimensionMismatch("CSV rows of mixed width");
        pts.emplace_back(Eigen::Map<const Vector>(r.data(), d));
        if (weight_column) w.push_back(r.back());
    }
    return empirical_from_points(pts, w);
}

} // namespace bicouple
