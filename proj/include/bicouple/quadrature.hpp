#pragma once

#include <functional>
#include <utility>

#include "types.hpp"

namespace bicouple {

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                        int max_depth = 40);

/// Nodes and weights of the n-point Gauss-Hermite rule for the standard
/// normal weight: sum_i w_i f(x_i) ~ E f(Z), Z ~ N(0, 1).
std::pair<Vector, Vector> gauss_hermite_normal(int n);

/// E f(Y) for Y ~ N(mean, cov) by a tensor Gauss-Hermite rule with n nodes per axis.
double gaussian_expectation(const std::function<double(const Vector&)>& f, const Vector& mean, const Matrix& cov,
                            int n = 32);

} // namespace bicouple
