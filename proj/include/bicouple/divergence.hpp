#pragma once

#include <string>
#include <vector>

#include "extended_real.hpp"
#include "measures.hpp"
#include "report.hpp"

namespace bicouple {

/// Ent(g1 | g2) = 1/2 (tr(S2^{-1} S1) + (m2-m1)' S2^{-1} (m2-m1) - d + log det S2 - log det S1).
template <typename Scalar>
Scalar kl_gaussian(const GaussianMeasure<Scalar>& g1, const GaussianMeasure<Scalar>& g2) {
    using Vector = typename Types<Scalar>::Vector;
    if (g1.dim() != g2.dim()) throw DimensionMismatch("kl_gaussian: dimensions differ");
    const auto d = static_cast<Scalar>(g1.dim());
    const Vector dm = g2.mean() - g1.mean();
    const Scalar trace_term = g2.cholesky().solve(g1.covariance()).trace();
    const Scalar quad = dm.dot(g2.solve(dm));
    const Scalar value = Scalar(0.5) * (trace_term + quad - d + g2.log_det() - g1.log_det());
    return value < Scalar(0) && value > Scalar(-1e-12) ? Scalar(0) : value;
}

/// Probability vector on a finite labelled support.
class DiscreteDistribution {
public:
    DiscreteDistribution(std::vector<std::string> labels, Vector probabilities);
    /// Labels "0", "1", ... ; probabilities must already sum to one within 1e-12.
    explicit DiscreteDistribution(const Vector& probabilities);

    /// Normalises nonnegative masses.
    static DiscreteDistribution from_masses(const Vector& masses);

    const std::vector<std::string>& labels() const { return labels_; }
    const Vector& probabilities() const { return probs_; }
    Eigen::Index size() const { return probs_.size(); }
    double operator[](Eigen::Index i) const { return probs_(i); }

private:
    std::vector<std::string> labels_;
    Vector probs_;
};

/// Sum p_i log(p_i / q_i) with 0 log(0/q) = 0; +inf when p charges a q-null atom.
ExtendedReal kl_discrete(const DiscreteDistribution& p, const DiscreteDistribution& q);

/// log sum_i (mu_i / ref_i)^q ref_i, the power moment of d mu / d ref;
/// +inf when mu is not absolutely continuous with respect to ref.
ExtendedReal log_power_moment(const DiscreteDistribution& mu, const DiscreteDistribution& ref, double q);

struct KnnEstimate {
    double value = 0.0;
    int k = 0;
    Eigen::Index n = 0;  ///< samples of the first law
    Eigen::Index m = 0;  ///< samples of the reference law
    std::string bias_note;
};

/// k-nearest-neighbour estimate of Ent(mu | nu) from samples:
/// (d/n) sum_i log(nu_k(i) / rho_k(i)) + log(m / (n - 1)), where rho_k(i) is
/// the k-th neighbour distance of x_i within mu's sample (excluding itself)
/// and nu_k(i) its k-th neighbour distance within nu's sample.
KnnEstimate kl_knn(const Empirical& mu_samples, const Empirical& nu_samples, int k = 5, unsigned threads = 0);

/// Checks Ent(mu1|mu2) <= p Ent(mu1|mu) + (p-1) log sum (mu/mu2)^{p/(p-1)} mu2.
/// The right side is +inf when d mu1/d mu or d mu/d mu2 fails to exist.
ExperimentReport interpolation_bound_check(const DiscreteDistribution& mu1, const DiscreteDistribution& mu2,
                                           const DiscreteDistribution& mu, double p);

} // namespace bicouple
