#include "bicouple/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "bicouple/parallel.hpp"

namespace bicouple {

namespace {

std::vector<std::string> index_labels(Eigen::Index n) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back(std::to_string(i));
    return labels;
}

void check_support(const DiscreteDistribution& a, const DiscreteDistribution& b) {
    if (a.labels() != b.labels()) throw DimensionMismatch("discrete distributions on different supports");
}

// Squared distance from `query` to its k-th nearest column of `pts`, skipping
// column `skip` (or none when skip < 0).
double kth_neighbour_sq(const Matrix& pts, const Eigen::Ref<const Vector>& query, int k, Eigen::Index skip) {
    std::priority_queue<double> heap;
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        if (j == skip) continue;
        const double d2 = (pts.col(j) - query).squaredNorm();
        if (static_cast<int>(heap.size()) < k) {
            heap.push(d2);
        } else if (d2 < heap.top()) {
            heap.pop();
            heap.push(d2);
        }
    }
    return heap.top();
}

} // namespace

DiscreteDistribution::DiscreteDistribution(std::vector<std::string> labels, Vector probabilities)
    : labels_(std::move(labels)), probs_(std::move(probabilities)) {
    if (probs_.size() < 1) throw InvalidMeasure("discrete distribution needs at least one atom");
    if (static_cast<Eigen::Index>(labels_.size()) != probs_.size())
        throw DimensionMismatch("label count differs from probability count");
    if (!probs_.allFinite() || (probs_.array() < 0.0).any()) throw InvalidMeasure("probabilities must be nonnegative");
    if (std::abs(probs_.sum() - 1.0) > 1e-12) throw InvalidMeasure("probabilities must sum to one");
}

DiscreteDistribution::DiscreteDistribution(const Vector& probabilities)
    : DiscreteDistribution(index_labels(probabilities.size()), probabilities) {}

DiscreteDistribution DiscreteDistribution::from_masses(const Vector& masses) {
    if (masses.size() < 1 || (masses.array() < 0.0).any() || !(masses.sum() > 0.0))
        throw InvalidMeasure("masses must be nonnegative with positive total");
    return DiscreteDistribution(Vector(masses / masses.sum()));
}

ExtendedReal kl_discrete(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    check_support(p, q);
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) return ExtendedReal::infinity();
        total += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(total, 0.0);
}

ExtendedReal log_power_moment(const DiscreteDistribution& mu, const DiscreteDistribution& ref, double q) {
    check_support(mu, ref);
    std::vector<double> terms;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (mu[i] == 0.0) continue;
        if (ref[i] == 0.0) return ExtendedReal::infinity();
        terms.push_back(q * std::log(mu[i]) + (1.0 - q) * std::log(ref[i]));
    }
    const double top = *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - top);
    return top + std::log(acc);
}

KnnEstimate kl_knn(const Empirical& mu_samples, const Empirical& nu_samples, int k, unsigned threads) {
    if (mu_samples.dim() != nu_samples.dim()) throw DimensionMismatch("kl_knn: sample dimensions differ");
    if (k < 1) throw InvalidArgument("kl_knn needs k >= 1");
    const Eigen::Index n = mu_samples.size(), m = nu_samples.size();
    if (n < k + 1 || m < k + 1) throw InvalidArgument("kl_knn needs at least k+1 samples from each law");
    if (!mu_samples.is_uniform() || !nu_samples.is_uniform()) throw InvalidArgument("kl_knn needs uniformly weighted samples");
    const auto d = static_cast<double>(mu_samples.dim());
    std::vector<double> log_ratio(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        const auto idx = static_cast<Eigen::Index>(i);
        const double rho2 = kth_neighbour_sq(mu_samples.points(), mu_samples.point(idx), k, idx);
        const double nu2 = kth_neighbour_sq(nu_samples.points(), mu_samples.point(idx), k, -1);
        if (rho2 <= 0.0) throw InvalidArgument("kl_knn: duplicate samples give a zero neighbour distance");
        log_ratio[i] = 0.5 * std::log(nu2 / rho2);
    });
    double sum = 0.0;
    for (double v : log_ratio) sum += v;
    KnnEstimate est;
    est.value = d * sum / static_cast<double>(n) + std::log(static_cast<double>(m) / static_cast<double>(n - 1));
    est.k = k;
    est.n = n;
    est.m = m;
    est.bias_note = "consistent k-NN estimator; finite-sample bias grows with dimension and with k/n, "
                    "and the estimate may be slightly negative";
    return est;
}

ExperimentReport interpolation_bound_check(const DiscreteDistribution& mu1, const DiscreteDistribution& mu2,
                                           const DiscreteDistribution& mu, double p) {
    check_support(mu1, mu2);
    check_support(mu1, mu);
    if (!(p > 1.0)) throw InvalidArgument("interpolation bound needs p > 1");
    const double q = p / (p - 1.0);
    const ExtendedReal lhs = kl_discrete(mu1, mu2);
    const ExtendedReal rhs_entropy = kl_discrete(mu1, mu);
    const ExtendedReal rhs_moment = log_power_moment(mu, mu2, q);
    ExtendedReal rhs;
    if (rhs_entropy.is_infinite() || rhs_moment.is_infinite())
        rhs = ExtendedReal::infinity();
    else
        rhs = p * rhs_entropy.value() + (p - 1.0) * rhs_moment.value();
    auto report = make_report("interpolation_bound", lhs, rhs, 1e-10);
    report.params = {{"p", p}, {"atoms", mu1.size()}};
    return report;
}

} // namespace bicouple
