#include <doctest.h>

#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bicouple/divergence.hpp"
#include "bicouple/oracles.hpp"

using namespace bicouple;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

void check_law(const Gaussian& g, const Vector& mean, const Matrix& cov, double tol) {
    CHECK(max_abs(g.mean() - mean) < tol);
    CHECK(max_abs(g.covariance() - cov) < tol);
}

// Mean of a column-wise scalar statistic with its standard error.
std::pair<double, double> mean_and_se(const Vector& v) {
    const double m = v.mean();
    const double var = (v.array() - m).square().sum() / (v.size() - 1.0);
    return {m, std::sqrt(var / v.size())};
}

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

} // namespace

TEST_CASE("linear_sde_law closed forms") {
    const Vector x = vec({1.0, -2.0});
    const Matrix I = Matrix::Identity(2, 2);
    for (double t : {0.01, 0.3, 1.0, 2.5}) {
        check_law(linear_sde_law(LinearSDESpec::heat(x, 1.0, 3.0), t), x, 2 * t * I, 1e-10);
        check_law(linear_sde_law(LinearSDESpec::ou(x, 1.0, 1.0, 3.0), t), std::exp(-t) * x, (1 - std::exp(-2 * t)) * I,
                  1e-10);
    }
    // A = -I, c = 0, Sigma = sqrt(2) I written out explicitly
    const auto explicit_ou = LinearSDESpec::constant(-I, Vector::Zero(2), std::sqrt(2.0) * I, GaussianMoments::dirac(x));
    check_law(linear_sde_law(explicit_ou, 0.7), std::exp(-0.7) * x, (1 - std::exp(-1.4)) * I, 1e-10);

    const Gaussian start(vec({0.5, 0.5}), (Matrix(2, 2) << 1.0, 0.2, 0.2, 0.5).finished());
    const auto spec = LinearSDESpec::constant(-I, vec({1.0, 0.0}), I, GaussianMoments::of(start));
    const Gaussian at0 = linear_sde_law(spec, 0.0);
    CHECK(at0.mean() == start.mean());
    CHECK(at0.covariance() == start.covariance());
    CHECK_THROWS_AS(linear_sde_law(LinearSDESpec::heat(x), 0.0), InvalidMeasure);
}

TEST_CASE("time-varying integration agrees with the matrix exponential") {
    Matrix A(2, 2), S(2, 2);
    A << -1.0, 0.5, -0.3, -0.8;
    S << 1.0, 0.0, 0.4, 0.7;
    const Vector c = vec({0.2, -0.1});
    const auto constant = LinearSDESpec::constant(A, c, S, GaussianMoments::dirac(vec({1.0, 1.0})), 2.0);
    auto varying = constant;
    varying.A_of_t = [A](double) { return A; };
    varying.Sigma_of_t = [S](double) { return S; };
    CHECK_FALSE(varying.time_homogeneous());
    const auto a = linear_sde_moments(constant, 1.5), b = linear_sde_moments(varying, 1.5);
    CHECK(max_abs(a.mean - b.mean) < 1e-9);
    CHECK(max_abs(a.cov - b.cov) < 1e-9);

    // genuinely time-dependent: a(t) = (1 + t) I, b = 0, integral of 2 a = 2 t + t^2
    auto ramp = LinearSDESpec::heat(Vector::Zero(1), 1.0, 2.0);
    ramp.Sigma_of_t = [](double t) { return Matrix::Constant(1, 1, std::sqrt(2.0 * (1.0 + t))); };
    CHECK(linear_sde_law(ramp, 1.0).covariance()(0, 0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("linear_sde_law matches Euler-Maruyama moments") {
    const Vector x = vec({1.0});
    for (const auto& spec : {LinearSDESpec::heat(x, 1.0, 1.0), LinearSDESpec::ou(x, 1.0, 0.5, 1.0),
                             LinearSDESpec::ou(x, 2.0, 1.5, 1.0)}) {
        const Gaussian law = linear_sde_law(spec, 1.0);
        const auto ens = simulate_ensemble(to_field(spec), x, TimeGrid::uniform(1.0, 400), 10000, 17);
        const Vector pts = ens.terminal().points().row(0).transpose();
        const auto [m, se] = mean_and_se(pts);
        CHECK(std::abs(m - law.mean()(0)) < 3 * se);
        const Vector sq = (pts.array() - law.mean()(0)).square().matrix();
        const auto [v, vse] = mean_and_se(sq);
        CHECK(std::abs(v - law.covariance()(0, 0)) < 3 * vse);
    }
}

TEST_CASE("score_gaussian") {
    const Gaussian g(vec({1.0, 2.0}), (Matrix(2, 2) << 2.0, 0.5, 0.5, 1.0).finished());
    CHECK(score_gaussian(g, g.mean()).norm() == 0.0);

    // 1-D Brownian law at time s (variance s): E|score|^2 = 1/s
    const double s = 0.25;
    const Gaussian bm(Vector::Zero(1), Matrix::Constant(1, 1, s));
    const Empirical draws = gaussian_sample(bm, 100000, 5);
    Vector sq(draws.size());
    for (Eigen::Index i = 0; i < draws.size(); ++i) sq(i) = score_gaussian(bm, draws.point(i)).squaredNorm();
    const auto [m, se] = mean_and_se(sq);
    CHECK(std::abs(m - 1.0 / s) < 3 * se);

    // d-dimensional N(x, s I): d / s, and the score averages to zero
    const int d = 3;
    const Gaussian iso = Gaussian::isotropic(vec({1.0, 0.0, -1.0}), s);
    const Empirical pts = gaussian_sample(iso, 100000, 6);
    Vector fisher(pts.size());
    Matrix scores(d, pts.size());
    for (Eigen::Index i = 0; i < pts.size(); ++i) {
        scores.col(i) = score_gaussian(iso, pts.point(i));
        fisher(i) = scores.col(i).squaredNorm();
    }
    const auto [f, fse] = mean_and_se(fisher);
    CHECK(std::abs(f - d / s) < 3 * fse);
    CHECK(iso.precision().trace() == doctest::Approx(d / s));
    for (int k = 0; k < d; ++k) {
        const auto [sm, sse] = mean_and_se(scores.row(k).transpose());
        CHECK(std::abs(sm) < 3 * sse);
    }

    // Heat law C = 2 s I: tr(C^{-1}) = d / (2 s)
    const Gaussian heat = linear_sde_law(LinearSDESpec::heat(Vector::Zero(d)), s);
    CHECK(heat.precision().trace() == doctest::Approx(d / (2 * s)));
}

TEST_CASE("phi_integrand") {
    const Vector x = vec({0.5, -0.5});
    const auto h1 = to_field(LinearSDESpec::heat(x, 1.0));
    const double s = 0.2;
    const Gaussian law = linear_sde_law(LinearSDESpec::heat(x, 1.0), s);
    const Vector y = vec({1.0, 0.3});
    CHECK(phi_integrand(h1, h1, law, s, y).norm() == 0.0);

    const Vector c = vec({0.7, -1.2});
    auto drifted = LinearSDESpec::heat(x, 1.0);
    drifted.c = c;
    CHECK(max_abs(phi_integrand(h1, to_field(drifted), law, s, y) - c) < 1e-12);

    const auto h2 = to_field(LinearSDESpec::heat(x, 2.0));
    CHECK(max_abs(phi_integrand(h1, h2, law, s, y) - (y - x) / (2 * s)) < 1e-10);

    CHECK_THROWS_AS(phi_integrand(h1, to_field(LinearSDESpec::heat(vec({0.0}))), law, s, y), DimensionMismatch);
}

TEST_CASE("bog_rhs") {
    const Vector x = vec({0.0, 1.0});
    const double t = 0.8;
    const auto spec1 = LinearSDESpec::heat(x, 1.0);
    const auto law = LawProvider::from_spec(spec1);

    const auto zero = bog_rhs(to_field(spec1), to_field(spec1), t, law);
    CHECK(zero.value == ExtendedReal(0.0));
    CHECK_FALSE(zero.divergent);
    CHECK(zero.standard_error == 0.0);

    const Vector c = vec({1.0, -0.5});
    auto drifted = spec1;
    drifted.c = c;
    const auto gap = bog_rhs(to_field(spec1), to_field(drifted), t, law);
    CHECK_FALSE(gap.divergent);
    CHECK(gap.value.value() == doctest::Approx(c.squaredNorm() * t / 2).epsilon(1e-9));
    const double ent = kl_gaussian(linear_sde_law(spec1, t), linear_sde_law(drifted, t));
    CHECK(ent == doctest::Approx(c.squaredNorm() * t / 4).epsilon(1e-9));
    CHECK(ent <= gap.value.value());

    // a1 = I, a2 = 2I from a point: E|a2^{-1/2} Phi|^2 = d/(4 s) exactly, so the time integral diverges.
    const auto spec2 = LinearSDESpec::heat(x, 2.0);
    const auto div = bog_rhs(to_field(spec1), to_field(spec2), t, law);
    CHECK(div.divergent);
    CHECK(div.value.is_infinite());
    CHECK(div.decade_increments.size() == 4);
    for (std::size_t k = 0; k < div.nodes.size(); k += 40) {
        const double exact = 2.0 / (4.0 * div.nodes[k]);
        CHECK(div.integrand[k] == doctest::Approx(exact).epsilon(0.05));
    }
    CHECK_THROWS_AS(bog_rhs(to_field(spec1), to_field(spec2), t, LawProvider{}), InvalidArgument);

    // Particle route: equal diffusions make Phi independent of the score.
    const auto particles = LawProvider::from_particles([&](double s) { return gaussian_sample(linear_sde_law(spec1, s), 400, 3); });
    BogOptions few;
    few.nodes = 20;
    const auto pg = bog_rhs(to_field(spec1), to_field(drifted), t, particles, few);
    CHECK(pg.value.value() == doctest::Approx(c.squaredNorm() * t / 2).epsilon(1e-9));
}

TEST_CASE("bridge_law_linear") {
    const Vector x = vec({0.3});
    const auto s1 = LinearSDESpec::ou(x, 1.0, 1.0, 2.0), s2 = LinearSDESpec::heat(x, 2.0, 2.0);
    const double t1 = 1.2;
    const Gaussian end1 = linear_sde_law(s1, t1);
    const Gaussian b1 = bridge_law_linear(s1, s2, x, t1, t1);
    CHECK(max_abs(b1.mean() - end1.mean()) < 1e-12);
    CHECK(max_abs(b1.covariance() - end1.covariance()) < 1e-12);

    const Gaussian b0 = bridge_law_linear(s1, s2, x, 0.0, t1);
    const Gaussian end2 = linear_sde_law(s2, t1);
    CHECK(max_abs(b0.covariance() - end2.covariance()) < 1e-12);

    const auto h1 = LinearSDESpec::heat(x, 1.0, 2.0);
    const Gaussian half = bridge_law_linear(h1, s2, x, t1 / 2, t1);
    CHECK(half.covariance()(0, 0) == doctest::Approx(2 * t1 / 2 + 4 * (t1 - t1 / 2)).epsilon(1e-12));
    CHECK(half.mean()(0) == doctest::Approx(0.3));
    CHECK_THROWS_AS(bridge_law_linear(h1, s2, x, 1.0, 0.5), InvalidArgument);

    // against simulation of the switched process
    const BridgeSpec spec(to_field(s1), to_field(s2), t1, 0.25, 2.0);
    const auto ens = bridge_ensemble(spec, x, TimeGrid::uniform(2.0, 500), 10000, 21);
    const Gaussian oracle = bridge_law_linear(s1, s2, x, spec.t0(), t1);
    const Vector pts = ens.terminal().points().row(0).transpose();
    const auto [m, se] = mean_and_se(pts);
    CHECK(std::abs(m - oracle.mean()(0)) < 3 * se);
    const auto [v, vse] = mean_and_se((pts.array() - oracle.mean()(0)).square().matrix());
    CHECK(std::abs(v - oracle.covariance()(0, 0)) < 3 * vse);
}

TEST_CASE("gaussian_log_power_moment against quadrature") {
    auto log_pdf = [](double x, double m, double v) { return -0.5 * (x - m) * (x - m) / v - 0.5 * std::log(2 * M_PI * v); };
    const double inf = std::numeric_limits<double>::infinity();
    for (auto [mb, vb, m2, v2, q] : {std::array<double, 5>{0.5, 1.0, 0.0, 2.0, 2.0},
                                     {0.0, 1.5, 0.2, 1.0, 1.5},
                                     {1.0, 0.8, -1.0, 1.2, 3.0}}) {
        const Gaussian pb(Vector::Constant(1, mb), Matrix::Constant(1, 1, vb));
        const Gaussian p2(Vector::Constant(1, m2), Matrix::Constant(1, 1, v2));
        const auto closed = gaussian_log_power_moment(pb, p2, q);
        const double quad = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            [&](double x) { return std::exp(q * log_pdf(x, mb, vb) + (1 - q) * log_pdf(x, m2, v2)); }, -inf, inf, 15, 1e-13);
        if (q / vb + (1 - q) / v2 > 0) {
            REQUIRE(closed.is_finite());
            CHECK(closed.value() == doctest::Approx(std::log(quad)).epsilon(1e-8));
        } else {
            CHECK(closed.is_infinite());
        }
    }
    // q = 2, vb = 2, v2 = 1: 2/2 - 1 = 0, not integrable
    CHECK(gaussian_log_power_moment(Gaussian(Vector::Zero(1), Matrix::Constant(1, 1, 2.0)), Gaussian::standard(1), 2.0)
              .is_infinite());
    CHECK(gaussian_log_power_moment(Gaussian::standard(2), Gaussian::standard(2), 4.0).value() ==
          doctest::Approx(0.0).epsilon(1e-12));
}
