#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "../dynamics.hpp"
#include "../meanfield.hpp"
#include "../oracles.hpp"

namespace bicouple::cli {

/// Built-in coefficient fields, selected by {"type": name, ...numeric parameters}.
///   heat              a = scale I, b = 0                     {a}
///   ou                a = scale I, b = -theta x              {theta, a}
///   drift-gap         a = scale I, b = c                     {c, a}
///   diffusion-gap     a = scale I, b = -theta x              {a (default 2), theta (default 0)}
///   mean-field-ou     b = theta (mean(mu) - x) + Dini part   {theta, sigma, kappa, dini_strength, alpha}
///   dini-power-drift  b_k = -strength sign(x_k) min(1, |x_k|^alpha), a = scale I  {alpha, strength, a}
std::vector<std::string> field_names();

/// Parameter names, defaults and descriptions of every catalog field.
nlohmann::json field_catalog();

/// Linear spec for heat, ou, drift-gap and diffusion-gap; throws for the others.
LinearSDESpec linear_spec(const nlohmann::json& selector, const Vector& x, double horizon);

CoefficientField field(const nlohmann::json& selector, Eigen::Index dim);

/// Distribution-dependent field; distribution-free catalog entries are lifted.
MVCoefficientField mv_field(const nlohmann::json& selector, Eigen::Index dim);

/// {"type": "gaussian", "mean": [...], "cov": [[...]]}, {"type": "dirac", "x": [...]}
/// or {"type": "points", "points": [[...], ...], "weights": [...]}.
Law law(const nlohmann::json& spec);

Vector to_vector(const nlohmann::json& j, const std::string& what);
Matrix to_matrix(const nlohmann::json& j, const std::string& what);

} // namespace bicouple::cli
