#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "extended_real.hpp"
#include "measures.hpp"

namespace bicouple {

/// Mean and covariance of a possibly degenerate Gaussian law (PSD covariance,
/// so point masses are representable).
struct GaussianMoments {
    Vector mean;
    Matrix cov;

    static GaussianMoments dirac(const Vector& x) { return {x, Matrix::Zero(x.size(), x.size())}; }
    static GaussianMoments of(const Gaussian& g) { return {g.mean(), g.covariance()}; }
    /// Throws InvalidMeasure when the covariance is not SPD.
    Gaussian measure() const { return Gaussian(mean, cov); }
};

/// dX = (A(t) X + c(t)) dt + Sigma(t) dW, so a = Sigma Sigma' / 2. The
/// constant members are used unless the matching time-dependent function is set.
struct LinearSDESpec {
    std::string name;
    Matrix A;
    Vector c;
    Matrix Sigma;
    std::function<Matrix(double)> A_of_t;
    std::function<Vector(double)> c_of_t;
    std::function<Matrix(double)> Sigma_of_t;
    GaussianMoments initial;
    double horizon = 1.0;

    /// Constant coefficients started from initial.
    static LinearSDESpec constant(Matrix A, Vector c, Matrix Sigma, GaussianMoments initial, double horizon = 1.0,
                                  std::string name = {});
    /// a = scale I, b = 0, started at x.
    static LinearSDESpec heat(const Vector& x, double scale = 1.0, double horizon = 1.0);
    /// b(x) = -theta x, a = scale I, started at x.
    static LinearSDESpec ou(const Vector& x, double theta, double scale = 1.0, double horizon = 1.0);

    Eigen::Index dim() const { return A.rows(); }
    bool time_homogeneous() const { return !A_of_t && !c_of_t && !Sigma_of_t; }
    Matrix drift_matrix(double t) const { return A_of_t ? A_of_t(t) : A; }
    Vector drift_offset(double t) const { return c_of_t ? c_of_t(t) : c; }
    Matrix sigma(double t) const { return Sigma_of_t ? Sigma_of_t(t) : Sigma; }
    Matrix diffusion(double t) const {
        const Matrix s = sigma(t);
        return 0.5 * s * s.transpose();
    }
    /// Same coefficients with a different initial law.
    LinearSDESpec started_at(GaussianMoments init) const;
    /// Throws unless shapes agree and a is SPD at sampled times in [0, horizon].
    void validate() const;
};

/// Moments at time t_to of the law that equals `law` at t_from. Constant
/// coefficients use matrix exponentials (Van Loan); otherwise fixed-step RK4
/// on m' = A m + c, C' = A C + C A' + Sigma Sigma'.
GaussianMoments propagate(const LinearSDESpec& spec, const GaussianMoments& law, double t_from, double t_to);

GaussianMoments linear_sde_moments(const LinearSDESpec& spec, double t);

/// Law at time t; throws InvalidMeasure when it is degenerate (e.g. t = 0 from a point mass).
Gaussian linear_sde_law(const LinearSDESpec& spec, double t);

/// Law at t1 of the switched process started at x1: spec1 on [0, t0], spec2 on (t0, t1].
Gaussian bridge_law_linear(const LinearSDESpec& spec1, const LinearSDESpec& spec2, const Vector& x1, double t0,
                           double t1);
GaussianMoments bridge_moments_linear(const LinearSDESpec& spec1, const LinearSDESpec& spec2, const Vector& x1,
                                      double t0, double t1);

/// Coefficient field with b(t, x) = A(t) x + c(t) in the Lipschitz part and sigma = Sigma(t).
CoefficientField to_field(const LinearSDESpec& spec);

/// grad log p(y) = -C^{-1} (y - m)
Vector score_gaussian(const Gaussian& g, const Vector& y);

/// Phi = (a1 - a2) grad log p + div(a1 - a2) + b2 - b1 at (s, y), with p the density of law1.
Vector phi_integrand(const CoefficientField& field1, const CoefficientField& field2, const Gaussian& law1, double s,
                     const Vector& y);

/// Law of X_s^{1,nu} for s in (0, t]: a Gaussian oracle or a particle cloud
/// (score estimated by a Gaussian kernel density with Silverman bandwidth).
struct LawProvider {
    std::function<Gaussian(double)> gaussian;
    std::function<Empirical(double)> particles;

    static LawProvider from_spec(const LinearSDESpec& spec);
    static LawProvider from_particles(std::function<Empirical(double)> cloud);
};

struct BogOptions {
    std::size_t n_mc = 10000;
    std::uint64_t seed = 1;
    int nodes = 200;          ///< geometric midpoint nodes on [t 1e-4, t]
    double overflow = 1e6;    ///< running-integral threshold for the divergence flag
    unsigned threads = 0;
};

struct BogResult {
    ExtendedReal value;  ///< 1/2 int_0^t E|a2^{-1/2} Phi|^2 ds, +inf when flagged divergent
    double truncated_value = 0.0;  ///< the finite quadrature sum, kept even when divergent
    bool divergent = false;
    std::vector<double> decade_increments;  ///< contributions of [t 10^{-k-1}, t 10^{-k}], k = 0..3
    double standard_error = 0.0;
    std::vector<double> nodes, integrand;  ///< time nodes and E|a2^{-1/2} Phi|^2 there
};

/// BOG right-hand side by Monte Carlo in space and midpoint quadrature in
/// time. Divergent when the running integral passes `overflow` or the last
/// decade contributes at least 0.9 of the one before (a 1/s integrand).
BogResult bog_rhs(const CoefficientField& field1, const CoefficientField& field2, double t, const LawProvider& law,
                  const BogOptions& options = {});

/// log int (dPb/dP2)^q dP2 for Gaussians; +inf unless q Pb^{-1} + (1-q) P2^{-1} is positive definite.
ExtendedReal gaussian_log_power_moment(const Gaussian& pb, const Gaussian& p2, double q);

} // namespace bicouple
