#include "bicouple/cli/catalog.hpp"

#include <algorithm>
#include <cmath>

#include "bicouple/error.hpp"

namespace bicouple::cli {

namespace {

using nlohmann::json;

const json& defaults() {
    static const json d = {
        {"heat", {{"a", 1.0}}},
        {"ou", {{"theta", 1.0}, {"a", 1.0}}},
        {"drift-gap", {{"c", 1.0}, {"a", 1.0}}},
        {"diffusion-gap", {{"a", 2.0}, {"theta", 0.0}}},
        {"mean-field-ou", {{"theta", 1.0}, {"sigma", std::sqrt(2.0)}, {"kappa", 0.0}, {"dini_strength", 0.0}, {"alpha", 0.5}}},
        {"dini-power-drift", {{"alpha", 0.5}, {"strength", 1.0}, {"a", 1.0}}},
    };
    return d;
}

// Selector merged over the defaults of its type; unknown keys are rejected.
json resolve(const json& selector) {
    std::string type;
    if (selector.is_string())
        type = selector.get<std::string>();
    else if (selector.is_object() && selector.contains("type") && selector["type"].is_string())
        type = selector["type"].get<std::string>();
    else
        throw InvalidArgument("field selector needs a string 'type'");
    if (!defaults().contains(type)) throw InvalidArgument("unknown field type '" + type + "'");
    json out = defaults()[type];
    if (selector.is_object())
        for (const auto& [key, value] : selector.items()) {
            if (key == "type") continue;
            if (!out.contains(key)) throw InvalidArgument("field '" + type + "' has no parameter '" + key + "'");
            out[key] = value;
        }
    out["type"] = type;
    return out;
}

double number(const json& j, const char* key) {
    if (!j[key].is_number()) throw InvalidArgument(std::string("field parameter '") + key + "' must be a number");
    return j[key].get<double>();
}

double positive(const json& j, const char* key) {
    const double v = number(j, key);
    if (!(v > 0.0)) throw InvalidArgument(std::string("field parameter '") + key + "' must be positive");
    return v;
}

Vector drift_offset(const json& j, Eigen::Index dim) {
    if (j["c"].is_number()) return Vector::Constant(dim, j["c"].get<double>());
    Vector c = to_vector(j["c"], "drift-gap c");
    if (c.size() != dim) throw DimensionMismatch("drift-gap c has the wrong dimension");
    return c;
}

VectorField dini_power(double strength, double alpha) {
    return [strength, alpha](double, const Vector& x) -> Vector {
        Vector b(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            const double sign = x(k) > 0.0 ? 1.0 : (x(k) < 0.0 ? -1.0 : 0.0);
            b(k) = -strength * sign * std::min(1.0, std::pow(std::abs(x(k)), alpha));
        }
        return b;
    };
}

} // namespace

std::vector<std::string> field_names() {
    std::vector<std::string> names;
    for (const auto& [key, value] : defaults().items()) names.push_back(key);
    return names;
}

json field_catalog() { return defaults(); }

Vector to_vector(const json& j, const std::string& what) {
    if (j.is_number()) return Vector::Constant(1, j.get<double>());
    if (!j.is_array() || j.empty()) throw InvalidArgument(what + " must be a nonempty list of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidArgument(what + " must contain only numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Matrix to_matrix(const json& j, const std::string& what) {
    if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
    if (!j.is_array() || j.empty()) throw InvalidArgument(what + " must be a list of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Vector first = to_vector(j[0], what + " row");
    Matrix m(rows, first.size());
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Vector row = to_vector(j[static_cast<std::size_t>(r)], what + " row");
        if (row.size() != first.size()) throw DimensionMismatch(what + " rows differ in length");
        m.row(r) = row.transpose();
    }
    return m;
}

LinearSDESpec linear_spec(const json& selector, const Vector& x, double horizon) {
    const json f = resolve(selector);
    const std::string type = f["type"];
    const Eigen::Index d = x.size();
    const Matrix root = std::sqrt(2.0 * positive(f, "a")) * Matrix::Identity(d, d);
    LinearSDESpec spec;
    if (type == "heat") {
        spec = LinearSDESpec::constant(Matrix::Zero(d, d), Vector::Zero(d), root, GaussianMoments::dirac(x), horizon);
    } else if (type == "ou" || type == "diffusion-gap") {
        spec = LinearSDESpec::constant(-number(f, "theta") * Matrix::Identity(d, d), Vector::Zero(d), root,
                                       GaussianMoments::dirac(x), horizon);
    } else if (type == "drift-gap") {
        spec = LinearSDESpec::constant(Matrix::Zero(d, d), drift_offset(f, d), root, GaussianMoments::dirac(x), horizon);
    } else {
        throw InvalidArgument("field '" + type + "' is not linear; this experiment needs heat, ou, drift-gap or diffusion-gap");
    }
    spec.name = type;
    return spec;
}

CoefficientField field(const json& selector, Eigen::Index dim) {
    const json f = resolve(selector);
    const std::string type = f["type"];
    if (type == "mean-field-ou") throw InvalidArgument("mean-field-ou depends on the law; use a mean-field experiment");
    if (type == "dini-power-drift") {
        const double alpha = number(f, "alpha"), strength = number(f, "strength");
        if (strength < 0.0) throw InvalidArgument("dini-power-drift strength must be nonnegative");
        CoefficientField c = make_field(dim, dini_power(strength, alpha), {},
                                        positive(f, "a") * Matrix::Identity(dim, dim), type);
        c.modulus = DiniModulus::power(alpha);
        c.K = std::max({1.0, strength * std::sqrt(double(dim)), f["a"].get<double>(), 1.0 / f["a"].get<double>()});
        return c;
    }
    CoefficientField c = to_field(linear_spec(f, Vector::Zero(dim), 1.0));
    c.name = type;
    return c;
}

MVCoefficientField mv_field(const json& selector, Eigen::Index dim) {
    const json f = resolve(selector);
    if (f["type"] == "mean-field-ou")
        return mean_field_ou(dim, number(f, "theta"), positive(f, "sigma"), number(f, "kappa"),
                             number(f, "dini_strength"), number(f, "alpha"));
    return MVCoefficientField::from_field(field(f, dim));
}

Law law(const json& spec) {
    if (!spec.is_object() || !spec.contains("type") || !spec["type"].is_string())
        throw InvalidArgument("law needs a string 'type' (gaussian, dirac or points)");
    const std::string type = spec["type"];
    const auto need = [&spec](const char* key) -> const json& {
        if (!spec.contains(key)) throw InvalidArgument(std::string("law is missing '") + key + "'");
        return spec[key];
    };
    if (type == "gaussian") {
        const Vector mean = to_vector(need("mean"), "law mean");
        const Matrix cov = spec.contains("cov") ? to_matrix(spec["cov"], "law cov")
                                                : Matrix(Matrix::Identity(mean.size(), mean.size()));
        return Gaussian(mean, cov);
    }
    if (type == "dirac") return Empirical(Matrix(to_vector(need("x"), "dirac x")));
    if (type == "points") {
        const Matrix rows = to_matrix(need("points"), "law points");
        Vector w;
        if (spec.contains("weights")) w = to_vector(spec["weights"], "law weights");
        return Empirical(rows.transpose(), w);
    }
    throw InvalidArgument("unknown law type '" + type + "'");
}

} // namespace bicouple::cli
