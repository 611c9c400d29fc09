#include "bicouple/quadrature.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bicouple/error.hpp"

namespace bicouple {

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double fa, double b, double fb, double m,
                    double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

std::pair<Vector, Vector> gauss_hermite_normal(int n) {
    if (n < 1) throw InvalidArgument("Gauss-Hermite rule needs n >= 1");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    Matrix jacobi = Matrix::Zero(n, n);
    for (int i = 1; i < n; ++i) jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
    Vector nodes = eig.eigenvalues();
    Vector weights = eig.eigenvectors().row(0).transpose().array().square().matrix();
    return {nodes, weights};
}

double gaussian_expectation(const std::function<double(const Vector&)>& f, const Vector& mean, const Matrix& cov,
                            int n) {
    const auto d = mean.size();
    const auto [nodes, weights] = gauss_hermite_normal(n);
    // Symmetric root works for singular covariances too.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const Matrix root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    double total = 0.0;
    Vector z(d);
    for (;;) {
        double w = 1.0;
        for (Eigen::Index k = 0; k < d; ++k) {
            z(k) = nodes(idx[static_cast<std::size_t>(k)]);
            w *= weights(idx[static_cast<std::size_t>(k)]);
        }
        total += w * f(mean + root * z);
        Eigen::Index k = 0;
        while (k < d && ++idx[static_cast<std::size_t>(k)] == n) idx[static_cast<std::size_t>(k++)] = 0;
        if (k == d) break;
    }
    return total;
}

} // namespace bicouple
