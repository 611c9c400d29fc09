#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <json.hpp>

#include "measures.hpp"

namespace bicouple {

/// Closed-form W2 between Gaussians:
/// sqrt(|m1-m2|^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2})).
/// Matrix roots come from symmetric eigendecompositions.
template <typename Scalar>
Scalar w2_gaussian(const GaussianMeasure<Scalar>& g1, const GaussianMeasure<Scalar>& g2) {
    using Matrix = typename Types<Scalar>::Matrix;
    if (g1.dim() != g2.dim()) throw DimensionMismatch("w2_gaussian: dimensions differ");
    Eigen::SelfAdjointEigenSolver<Matrix> root2(g2.covariance());
    const Matrix s2 = root2.operatorSqrt();
    const Matrix inner = s2 * g1.covariance() * s2;
    Eigen::SelfAdjointEigenSolver<Matrix> cross((inner + inner.transpose()) / Scalar(2), Eigen::EigenvaluesOnly);
    const Scalar cross_trace = cross.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt().sum();
    const Scalar sq = (g1.mean() - g2.mean()).squaredNorm() + g1.covariance().trace() +
                      g2.covariance().trace() - Scalar(2) * cross_trace;
    return std::sqrt(std::max(sq, Scalar(0)));
}

/// Exact W2 between 1-D measures by the comonotone (sorted quantile) coupling.
double w2_empirical_1d(const Empirical& mu, const Empirical& nu);

/// Dense transport plan between two empirical measures.
struct CouplingPlan {
    Matrix mass;   ///< rows index mu's atoms, columns nu's atoms
    double cost = 0.0;  ///< sum_ij mass_ij |x_i - y_j|^2

    Eigen::Index rows() const { return mass.rows(); }
    Eigen::Index cols() const { return mass.cols(); }

    double recompute_cost(const Empirical& mu, const Empirical& nu) const;
    /// Max-norm deviation of the row/column sums from the marginal weights.
    double marginal_violation(const Empirical& mu, const Empirical& nu) const;
};

/// {cost, rows, cols, triplets: [[i, j, mass], ...]} with zero entries dropped.
nlohmann::json to_json(const CouplingPlan& plan);

enum class OtMethod { exact, entropic };

struct OtOptions {
    OtMethod method = OtMethod::exact;
    double epsilon = 0.0;               ///< entropic regularisation, > 0 for entropic
    int max_iterations = 10000;         ///< Sinkhorn budget
    double tolerance = 1e-7;            ///< Sinkhorn marginal violation target
    std::size_t max_entries = 4'000'000;  ///< exact solver refuses n*m above this
    bool debias = true;                 ///< entropic: also compute the debiased cost
};

struct OtResult {
    double distance = 0.0;  ///< sqrt of the plan's transport cost
    CouplingPlan plan;
    double raw_cost = 0.0;  ///< <plan, C>
    std::optional<double> debiased_cost;  ///< entropic only: OT_e(mu,nu) - (OT_e(mu,mu) + OT_e(nu,nu))/2
    int iterations = 0;
};

OtResult w2_empirical_ot(const Empirical& mu, const Empirical& nu, const OtOptions& options = {});

/// Plan attaining W2^2 (exact solver).
CouplingPlan optimal_coupling_discrete(const Empirical& mu, const Empirical& nu);

/// |x_i - y_j|^2 for all atom pairs.
Matrix squared_distance_matrix(const Empirical& mu, const Empirical& nu);

/// Minimum-cost perfect matching for a square cost matrix; result[i] is the
/// column assigned to row i.
std::vector<Eigen::Index> solve_assignment(const Matrix& cost);

/// Minimum-cost transportation plan between weight vectors a (rows) and b
/// (columns), both summing to one, by successive shortest paths.
Matrix solve_transportation(const Matrix& cost, const Vector& a, const Vector& b);

} // namespace bicouple
