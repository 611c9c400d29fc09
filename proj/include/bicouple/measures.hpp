#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "error.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace bicouple {

/// Non-degenerate Gaussian law N(mean, covariance) on R^d.
///
/// The covariance must be symmetric (entrywise within 1e-12 relative to its
/// scale) with smallest eigenvalue above 1e-12 times the largest. The
/// Cholesky factor is kept for sampling, solves and log-determinants.
template <typename Scalar>
class GaussianMeasure {
public:
    using Vector = typename Types<Scalar>::Vector;
    using Matrix = typename Types<Scalar>::Matrix;

    GaussianMeasure(Vector mean, Matrix covariance)
        : mean_(std::move(mean)), cov_(std::move(covariance)) {
        const auto d = mean_.size();
        if (d < 1) throw InvalidMeasure("Gaussian measure needs dimension >= 1");
        if (cov_.rows() != d || cov_.cols() != d)
            throw DimensionMismatch("covariance shape does not match mean dimension");
        if (!mean_.allFinite() || !cov_.allFinite())
            throw InvalidMeasure("Gaussian parameters must be finite");
        const Scalar scale = std::max<Scalar>(Scalar(1), cov_.cwiseAbs().maxCoeff());
        if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * scale)
            throw InvalidMeasure("covariance is not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_, Eigen::EigenvaluesOnly);
        const Scalar lo = eig.eigenvalues().minCoeff();
        const Scalar hi = eig.eigenvalues().maxCoeff();
        if (!(lo > Scalar(0)) || !(lo > Scalar(1e-12) * hi))
            throw InvalidMeasure("covariance is not symmetric positive definite");
        llt_.compute(cov_);
        if (llt_.info() != Eigen::Success) throw InvalidMeasure("Cholesky factorisation failed");
    }

    static GaussianMeasure isotropic(Vector mean, Scalar variance) {
        const auto d = mean.size();
        return GaussianMeasure(std::move(mean), variance * Matrix::Identity(d, d));
    }

    static GaussianMeasure standard(Eigen::Index d) {
        return GaussianMeasure(Vector::Zero(d), Matrix::Identity(d, d));
    }

    Eigen::Index dim() const { return mean_.size(); }
    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return cov_; }
    const Eigen::LLT<Matrix>& cholesky() const { return llt_; }

    Scalar log_det() const {
        return Scalar(2) * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }

    /// covariance^{-1} * v
    Vector solve(const Vector& v) const { return llt_.solve(v); }

    Matrix precision() const { return llt_.solve(Matrix::Identity(dim(), dim())); }

private:
    Vector mean_;
    Matrix cov_;
    Eigen::LLT<Matrix> llt_;
};

/// Weighted atomic measure sum_i w_i delta_{x_i}. Points are stored as the
/// columns of a d x n matrix. Weights are always stored, normalised to one.
template <typename Scalar>
class EmpiricalMeasure {
public:
    using Vector = typename Types<Scalar>::Vector;
    using Matrix = typename Types<Scalar>::Matrix;

    explicit EmpiricalMeasure(Matrix points) : EmpiricalMeasure(std::move(points), Vector()) {}

    /// An empty weight vector means uniform weights.
    EmpiricalMeasure(Matrix points, Vector weights) : points_(std::move(points)) {
        const auto n = points_.cols();
        if (n < 1) throw InvalidMeasure("empirical measure needs at least one point");
        if (points_.rows() < 1) throw InvalidMeasure("empirical measure needs dimension >= 1");
        if (!points_.allFinite()) throw InvalidMeasure("empirical measure points must be finite");
        if (weights.size() == 0) {
            weights_ = Vector::Constant(n, Scalar(1) / Scalar(n));
            uniform_ = true;
        } else {
            if (weights.size() != n) throw DimensionMismatch("weight count differs from point count");
            if (!weights.allFinite() || (weights.array() < Scalar(0)).any())
                throw InvalidMeasure("weights must be finite and nonnegative");
            const Scalar total = weights.sum();
            if (!(total > Scalar(0))) throw InvalidMeasure("weights must have positive total mass");
            weights_ = weights / total;
            uniform_ = (weights_.array() == weights_(0)).all();
        }
        mean_ = points_ * weights_;
    }

    Eigen::Index dim() const { return points_.rows(); }
    Eigen::Index size() const { return points_.cols(); }
    const Matrix& points() const { return points_; }
    const Vector& weights() const { return weights_; }
    auto point(Eigen::Index i) const { return points_.col(i); }
    Scalar weight(Eigen::Index i) const { return weights_(i); }
    bool is_uniform() const { return uniform_; }
    const Vector& mean() const { return mean_; }

    Matrix covariance() const {
        const Matrix centered = points_.colwise() - mean_;
        return centered * weights_.asDiagonal() * centered.transpose();
    }

private:
    Matrix points_;
    Vector weights_;
    Vector mean_;
    bool uniform_ = false;
};

using Gaussian = GaussianMeasure<double>;
using Empirical = EmpiricalMeasure<double>;

/// Builds an empirical measure from a list of points (and optional raw
/// weights, normalised on the way in).
template <typename Scalar>
EmpiricalMeasure<Scalar> empirical_from_points(
    const std::vector<typename Types<Scalar>::Vector>& points,
    const std::vector<Scalar>& weights = {}) {
    using Matrix = typename Types<Scalar>::Matrix;
    using Vector = typename Types<Scalar>::Vector;
    if (points.empty()) throw InvalidMeasure("empirical measure needs at least one point");
    const auto d = points.front().size();
    Matrix m(d, static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != d) throw DimensionMismatch("points of mixed dimension");
        m.col(static_cast<Eigen::Index>(i)) = points[i];
    }
    Vector w;
    if (!weights.empty()) {
        if (weights.size() != points.size()) throw DimensionMismatch("weight count differs from point count");
        w = Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    }
    return EmpiricalMeasure<Scalar>(std::move(m), std::move(w));
}

inline Empirical empirical_from_points(const std::vector<Vector>& points, const std::vector<double>& weights = {}) {
    return empirical_from_points<double>(points, weights);
}

/// Dirac mass at x.
template <typename Derived>
EmpiricalMeasure<typename Derived::Scalar> dirac(const Eigen::MatrixBase<Derived>& x) {
    return EmpiricalMeasure<typename Derived::Scalar>(x.eval());
}

/// n i.i.d. draws from g via its Cholesky factor; deterministic in seed.
template <typename Scalar>
EmpiricalMeasure<Scalar> gaussian_sample(const GaussianMeasure<Scalar>& g, Eigen::Index n, std::uint64_t seed) {
    using Matrix = typename Types<Scalar>::Matrix;
    if (n < 1) throw InvalidArgument("gaussian_sample needs n >= 1");
    StreamRng rng(seed, 0);
    std::normal_distribution<Scalar> normal;
    Matrix z(g.dim(), n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < g.dim(); ++i) z(i, j) = normal(rng);
    Matrix pts = g.cholesky().matrixL() * z;
    pts.colwise() += g.mean();
    return EmpiricalMeasure<Scalar>(std::move(pts));
}

/// Integral of |x|^2: |mean|^2 + tr(covariance).
template <typename Scalar>
Scalar second_moment(const GaussianMeasure<Scalar>& g) {
    return g.mean().squaredNorm() + g.covariance().trace();
}

template <typename Scalar>
Scalar second_moment(const EmpiricalMeasure<Scalar>& m) {
    return m.points().colwise().squaredNorm().dot(m.weights());
}

/// Mass-preserving resampling of m to n equally weighted atoms. Returns m's
/// own points unchanged when m is uniform with exactly n atoms.
template <typename Scalar>
EmpiricalMeasure<Scalar> resample(const EmpiricalMeasure<Scalar>& m, Eigen::Index n, std::uint64_t seed) {
    using Matrix = typename Types<Scalar>::Matrix;
    if (n < 1) throw InvalidArgument("resample needs n >= 1");
    if (m.is_uniform() && m.size() == n) return EmpiricalMeasure<Scalar>(m.points());
    StreamRng rng(seed, 0);
    std::discrete_distribution<Eigen::Index> pick(m.weights().data(), m.weights().data() + m.size());
    Matrix pts(m.dim(), n);
    for (Eigen::Index j = 0; j < n; ++j) pts.col(j) = m.point(pick(rng));
    return EmpiricalMeasure<Scalar>(std::move(pts));
}

} // namespace bicouple
