#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bicouple/meanfield.hpp"
#include "bicouple/transport.hpp"

using namespace bicouple;

namespace {

CoefficientField ou_field(Eigen::Index d, double theta, double a) {
    return make_field(d, {}, [theta](double, const Vector& x) -> Vector { return -theta * x; },
                      a * Matrix::Identity(d, d), "ou");
}

// Columns sorted lexicographically: a canonical form of the multiset of atoms.
Matrix canonical(const Matrix& x) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.cols()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index k = 0; k < x.rows(); ++k)
            if (x(k, a) != x(k, b)) return x(k, a) < x(k, b);
        return false;
    });
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < order.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = x.col(order[i]);
    return out;
}

} // namespace

TEST_CASE("mean-field OU satisfies the sampled Lipschitz check") {
    const auto f = mean_field_ou(2, 1.0, std::sqrt(2.0), 0.5, 0.3, 0.5);
    const auto c = check_mv_field(f, 1.0);
    CHECK(c.ok);
    CHECK(c.drift_ratio <= 1.05 * f.K);
    CHECK(c.drift_ratio > 0.0);

    auto tight = mean_field_ou(1, 3.0, 1.0);
    tight.K = 0.5;
    CHECK_FALSE(check_mv_field(tight, 1.0).ok);

    const auto k = estimate_lipschitz(mean_field_ou(1, 1.0, 1.0), 1.0);
    CHECK(k.space == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(k.law <= 1.0 + 1e-9);
    CHECK(k.law > 0.3);
}

TEST_CASE("distribution-free fields reproduce independent Euler-Maruyama paths bit for bit") {
    const auto f = ou_field(2, 0.8, 0.6);
    const auto mv = MVCoefficientField::from_field(f);
    const Matrix start = gaussian_sample(Gaussian::standard(2), 16, 3).points();
    const TimeGrid g = TimeGrid::uniform(1.0, 50);
    const auto cloud = evolve_cloud(mv, start, g, 9);
    for (Eigen::Index i = 0; i < start.cols(); ++i)
        CHECK(cloud.paths[static_cast<std::size_t>(i)] == euler_maruyama(f, start.col(i), g, 9, static_cast<std::uint64_t>(i)).paths[0]);
}

TEST_CASE("exchangeability: permuting particles and their streams") {
    const auto f = mean_field_ou(2, 1.0, 1.0, 0.5);
    const std::size_t n = 40;
    const Matrix start = gaussian_sample(Gaussian::standard(2), static_cast<Eigen::Index>(n), 5).points();
    const TimeGrid g = TimeGrid::uniform(0.5, 25);
    const auto base = evolve_cloud(f, start, g, 12);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::reverse(perm.begin(), perm.end());
    std::rotate(perm.begin(), perm.begin() + 7, perm.end());
    Matrix permuted(2, static_cast<Eigen::Index>(n));
    ParticleOptions opt;
    for (std::size_t i = 0; i < n; ++i) {
        permuted.col(static_cast<Eigen::Index>(i)) = start.col(static_cast<Eigen::Index>(perm[i]));
        opt.streams.push_back(perm[i]);
    }
    const auto moved = evolve_cloud(f, permuted, g, 12, opt);
    CHECK(canonical(moved.terminal().points()) == canonical(base.terminal().points()));
    for (std::size_t i = 0; i < n; ++i) CHECK(moved.paths[i] == base.paths[perm[i]]);

    ParticleOptions threaded;
    threaded.threads = 3;
    CHECK(canonical(evolve_cloud(f, start, g, 12, threaded).terminal().points()) == canonical(base.terminal().points()));
}

TEST_CASE("distribution-free cloud matches independent runs statistically") {
    const auto f = ou_field(1, 1.0, 0.5);
    const TimeGrid g = TimeGrid::uniform(1.0, 200);
    const std::size_t n = 4000;
    const Vector x0 = Vector::Constant(1, 0.7);
    const Empirical cloud = evolve_particles(MVCoefficientField::from_field(f), dirac(x0), n, g, 3).terminal();
    const Empirical indep = simulate_ensemble(f, x0, g, n, 99).terminal();
    const double var = 0.5 * (1 - std::exp(-2.0));
    const double mean_se = std::sqrt(2 * var / n);           // difference of two sample means
    const double var_se = var * std::sqrt(2.0 * 2.0 / (n - 1));  // difference of two sample variances
    CHECK(std::abs(cloud.mean()(0) - indep.mean()(0)) < 3 * mean_se);
    CHECK(std::abs(cloud.covariance()(0, 0) - indep.covariance()(0, 0)) < 3 * var_se);
}

TEST_CASE("linear mean-field drift conserves the mean") {
    const auto f = mean_field_ou(1, 1.0, 1.0);  // b = mean(mu) - x, a = 1/2
    const std::size_t n = 2000;
    const double T = 1.0;
    const auto e = evolve_particles(f, Gaussian(Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 1.0)), n,
                                    TimeGrid::uniform(T, 100), 4);
    // Initial sampling error plus the averaged noise.
    const double se = std::sqrt((1.0 + T) / static_cast<double>(n));
    CHECK(std::abs(e.terminal().mean()(0) - 1.0) < 3 * se);
}

TEST_CASE("single particle with interaction is accepted") {
    const auto e = evolve_particles(mean_field_ou(1, 1.0, 1.0), dirac(Vector::Constant(1, 2.0)), 1,
                                    TimeGrid::uniform(1.0, 10), 1);
    CHECK(e.paths.size() == 1);
    CHECK(e.terminal().size() == 1);
}

TEST_CASE("flow_map") {
    const auto mv = MVCoefficientField::from_field(ou_field(1, 1.0, 0.5));
    const TimeGrid g = TimeGrid::uniform(1.0, 200);
    const Gaussian mu0(Vector::Constant(1, 0.5), Matrix::Constant(1, 1, 2.0));
    const Empirical at0 = flow_map(mv, mu0, 0.0, 300, g, 8);
    CHECK(at0.size() == 300);
    CHECK(std::abs(at0.mean()(0) - 0.5) < 3 * std::sqrt(2.0 / 300));
    CHECK(evolve_particles(mv, mu0, 300, g, 8).slice(0).points() == at0.points());

    const double x = 2.0;
    const Empirical c = flow_map(mv, dirac(Vector::Constant(1, x)), 1.0, 10000, g, 6);
    const double var = 0.5 * (1 - std::exp(-2.0));
    CHECK(std::abs(c.mean()(0) - x * std::exp(-1.0)) < 3 * std::sqrt(var / 10000));
    CHECK_THROWS_AS(flow_map(mv, mu0, 2.0, 10, g, 1), InvalidArgument);
}

TEST_CASE("flow property: restarting at s matches running to t") {
    const auto f = mean_field_ou(1, 1.0, 1.0, 0.5);
    const Gaussian mu0(Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 0.5));
    const std::size_t n = 1000;
    const TimeGrid g = TimeGrid::uniform(1.0, 100);
    // The cloud mean is a martingale with O(n^{-1/2}) noise, so single
    // comparisons are noisy; average over independent seed sets.
    double restart = 0.0, baseline = 0.0;
    for (std::uint64_t s = 0; s < 6; ++s) {
        const Empirical direct = flow_map(f, mu0, 1.0, n, g, 10 * s + 1);
        const Empirical mid = flow_map(f, mu0, 0.4, n, g, 10 * s + 2);
        const Empirical restarted = flow_map(f, mid, 0.6, n, TimeGrid::uniform(0.6, 60), 10 * s + 3);
        const Empirical other = flow_map(f, mu0, 1.0, n, g, 10 * s + 4);
        restart += cloud_w2(direct, restarted);
        baseline += cloud_w2(direct, other);
    }
    CHECK(restart < 1.5 * baseline);
}

TEST_CASE("self-convergence of the particle approximation") {
    const auto f = mean_field_ou(1, 1.0, 1.0, 1.0);
    const Gaussian mu0(Vector::Constant(1, 0.0), Matrix::Constant(1, 1, 1.0));
    const TimeGrid g = TimeGrid::uniform(1.0, 50);
    const Empirical reference = flow_map(f, mu0, 1.0, 16384, g, 77);
    std::vector<double> dist;
    for (std::size_t n : {64, 256, 1024}) {
        double sum = 0.0;
        for (std::uint64_t s = 0; s < 4; ++s) sum += cloud_w2(flow_map(f, mu0, 1.0, n, g, 10 + s), reference);
        dist.push_back(sum / 4);
    }
    CHECK(dist[1] < dist[0]);
    CHECK(dist[2] < dist[1]);
}

TEST_CASE("W2 stability experiment") {
    const TimeGrid g = TimeGrid::uniform(1.0, 100);
    const Gaussian a(Vector::Constant(1, 0.0), Matrix::Constant(1, 1, 1.0));
    const Gaussian b(Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 1.0));

    const auto same = w2_stability_experiment(mean_field_ou(1, 1.0, 1.0), a, a, g, 200, 1);
    CHECK(same.verdict == Verdict::degenerate);
    CHECK(same.left.value() < 1e-12);

    // contractive distribution-free drift b = -x
    const auto contract = w2_stability_experiment(MVCoefficientField::from_field(ou_field(1, 1.0, 0.5)), a, b, g, 500, 2);
    CHECK(contract.left.value() <= 1.0 + contract.tolerance);
    CHECK(contract.series->grid.size() == 10);

    StabilityOptions opt;
    opt.slack_factor = 1.2;
    Matrix cov(2, 2);
    cov << 1.0, 0.3, 0.3, 0.5;
    const auto mf = w2_stability_experiment(mean_field_ou(2, 1.0, 1.0, 0.5), Gaussian::standard(2),
                                            Gaussian(Vector::Ones(2), cov), g, 128, 3, opt);
    CHECK(mf.verdict == Verdict::holds);
    CHECK(mf.params["bound"].get<double>() ==
          doctest::Approx(1.2 * std::exp(mf.params["lipschitz_space"].get<double>() + mf.params["lipschitz_law"].get<double>())));

    StabilityOptions fixed;
    fixed.bound = 0.1;
    CHECK(w2_stability_experiment(mean_field_ou(1, 1.0, 1.0), a, b, g, 100, 1, fixed).verdict == Verdict::violated);
}
