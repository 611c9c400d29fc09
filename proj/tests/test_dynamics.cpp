#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bicouple/dynamics.hpp"

using namespace bicouple;

namespace {

struct Moments {
    double mean = 0.0, var = 0.0;
    std::size_t n = 0;
    double mean_se() const { return std::sqrt(var / static_cast<double>(n)); }
    // Standard error of the sample variance under a Gaussian law.
    double var_se() const { return var * std::sqrt(2.0 / static_cast<double>(n - 1)); }
};

Moments coordinate_moments(const Empirical& e, Eigen::Index coord = 0) {
    Moments m;
    m.n = static_cast<std::size_t>(e.size());
    m.mean = e.points().row(coord).mean();
    m.var = (e.points().row(coord).array() - m.mean).square().sum() / static_cast<double>(m.n - 1);
    return m;
}

CoefficientField ou_field(double theta, double a) {
    return make_field(1, {}, [theta](double, const Vector& x) -> Vector { return -theta * x; },
                      Matrix::Constant(1, 1, a), "ou");
}

CoefficientField heat_field(Eigen::Index d, double a) { return make_field(d, {}, {}, a * Matrix::Identity(d, d), "heat"); }

} // namespace

TEST_CASE("Dini moduli") {
    const auto p = DiniModulus::power(0.5).check();
    CHECK(p.ok);
    CHECK(p.integral == doctest::Approx(2.0).epsilon(1e-6));  // int_0^1 s^{-1/2} ds
    CHECK(DiniModulus::power(1.0).check().integral == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(DiniModulus::log_type(2.0).check().ok);

    CHECK_FALSE(DiniModulus([](double r) { return r * r; }, "square").check().ok);  // convex
    CHECK_FALSE(DiniModulus([](double r) { return 1.0 + r; }, "offset").check().ok);  // phi(0) != 0
    // phi = 1/(1 - log r) near zero: concave and increasing, but int phi(s)/s ds = inf.
    CHECK_FALSE(DiniModulus([](double r) { return r <= 0 ? 0.0 : 1.0 / (1.0 + std::log1p(1.0 / r)); }, "log1").check().ok);
    CHECK_THROWS_AS(DiniModulus::power(1.5), InvalidArgument);
}

TEST_CASE("check_field") {
    const auto ok = check_field(ou_field(1.0, 0.5), 1.0);
    CHECK(ok.ok);
    CHECK(ok.max_sigma_error < 1e-8);
    CHECK(ok.lip_b1 == doctest::Approx(1.0).epsilon(0.05));

    CoefficientField bad = heat_field(2, 1.0);
    bad.K = 0.5;  // ||a^{-1}|| = 1 > K
    CHECK_FALSE(check_field(bad, 1.0).ok);

    CoefficientField wrong_sigma = heat_field(1, 1.0);
    wrong_sigma.constant_sigma = Matrix::Constant(1, 1, 1.0);  // sigma^2 = 1 != 2a
    CHECK_FALSE(check_field(wrong_sigma, 1.0).ok);
}

TEST_CASE("TimeGrid") {
    const TimeGrid g = TimeGrid::uniform(1.0, 4);
    CHECK(g.steps() == 4);
    CHECK(g.max_step() == doctest::Approx(0.25));
    CHECK(g.index_of(0.5).value() == 2);
    const TimeGrid r = g.refined_with(0.3);
    CHECK(r.steps() == 5);
    CHECK(r.index_of(0.3).has_value());
    CHECK(g.refined_with(0.5).steps() == 4);
    const TimeGrid fine = TimeGrid::uniform(1.0, 200);
    const TimeGrid snapped = fine.refined_with(0.32);
    CHECK(snapped.steps() == 200);
    CHECK(snapped.index_of(0.32).value() == 64);
    CHECK_THROWS_AS(g.refined_with(1.0 - 1e-14), InvalidArgument);
    const TimeGrid c = g.truncated(0.6);
    CHECK(c.horizon() == 0.6);
    CHECK(c.steps() == 3);
    CHECK_THROWS_AS(g.refined_with(2.0), InvalidArgument);
    CHECK_THROWS(TimeGrid({0.0, 0.5, 0.4}));
}

TEST_CASE("euler_maruyama: heat variance 2t") {
    const double T = 0.5;
    const auto ens = simulate_ensemble(heat_field(2, 1.0), Vector::Zero(2), TimeGrid::uniform(T, 50), 10000, 3);
    const Matrix cov = ens.terminal().covariance();
    for (int i = 0; i < 2; ++i) CHECK(std::abs(cov(i, i) - 2.0 * T) < 0.05 * 2.0 * T);
    CHECK(std::abs(cov(0, 1)) < 0.05 * 2.0 * T);
}

TEST_CASE("euler_maruyama: zero coefficients keep the start") {
    Vector x0(2);
    x0 << 1.5, -2.0;
    const auto e = euler_maruyama(make_field(2, {}, {}, Matrix::Zero(2, 2)), x0, TimeGrid::uniform(1.0, 20), 1);
    for (Eigen::Index k = 0; k < e.paths[0].cols(); ++k) CHECK(e.paths[0].col(k) == x0);
}

TEST_CASE("euler_maruyama: OU mean x0 e^{-t}") {
    const double T = 1.0, x0 = 2.0;
    const auto ens = simulate_ensemble(ou_field(1.0, 0.5), Vector::Constant(1, x0), TimeGrid::uniform(T, 500), 10000, 5);
    const Moments m = coordinate_moments(ens.terminal());
    // Discretisation bias x0((1-h)^n - e^{-1}) is about 4e-4 here, far below the 3 sigma band.
    CHECK(std::abs(m.mean - x0 * std::exp(-T)) < 3.0 * m.mean_se());
    CHECK(std::abs(m.var - 0.5 * (1 - std::exp(-2 * T))) < 3.0 * m.var_se());
}

TEST_CASE("euler_maruyama: blow-up is reported with a smaller step") {
    const auto cubic = make_field(1, {}, [](double, const Vector& x) -> Vector { return x.array().cube().matrix(); },
                                  Matrix::Constant(1, 1, 0.5));
    const TimeGrid g = TimeGrid::uniform(1.0, 4);
    try {
        euler_maruyama(cubic, Vector::Constant(1, 1e5), g, 1);
        FAIL("expected a blow-up");
    } catch (const BlowUpError& e) {
        CHECK(e.suggested_step() == doctest::Approx(0.125));
    }
    const auto ens = simulate_ensemble(cubic, Vector::Constant(1, 1e5), g, 4, 1);
    CHECK(ens.flagged());
    CHECK(ens.aborted.size() == 4);
}

TEST_CASE("determinism across thread counts and seeds") {
    const auto field = ou_field(0.7, 0.8);
    const TimeGrid g = TimeGrid::uniform(1.0, 40);
    SimulationOptions one, many;
    one.threads = 1;
    many.threads = 4;
    const auto a = simulate_ensemble(field, Vector::Constant(1, 0.3), g, 97, 11, one);
    const auto b = simulate_ensemble(field, Vector::Constant(1, 0.3), g, 97, 11, many);
    const auto c = simulate_ensemble(field, Vector::Constant(1, 0.3), g, 97, 12, one);
    for (std::size_t p = 0; p < 97; ++p) CHECK(a.paths[p] == b.paths[p]);
    CHECK(a.paths[5] != c.paths[5]);
    // path p of an ensemble is euler_maruyama on stream p
    CHECK(euler_maruyama(field, Vector::Constant(1, 0.3), g, 11, 42).paths[0] == a.paths[42]);
}

TEST_CASE("weak order one for the additive 1-D case") {
    // Antithetic pairs cancel the noise in the mean exactly for linear drift, leaving the discretisation error.
    const auto field = ou_field(1.0, 0.5);
    const double T = 1.0, x0 = 1.0;
    SimulationOptions opt;
    opt.antithetic = true;
    std::vector<double> logh, logerr;
    for (int j = 4; j <= 8; ++j) {
        const std::size_t steps = std::size_t{1} << j;
        const auto ens = simulate_ensemble(field, Vector::Constant(1, x0), TimeGrid::uniform(T, steps), 200, 9, opt);
        const double err = std::abs(ens.terminal().mean()(0) - x0 * std::exp(-T));
        logh.push_back(std::log(T / static_cast<double>(steps)));
        logerr.push_back(std::log(err));
    }
    const auto n = static_cast<double>(logh.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < logh.size(); ++i) {
        sx += logh[i];
        sy += logerr[i];
        sxx += logh[i] * logh[i];
        sxy += logh[i] * logerr[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(std::abs(slope - 1.0) < 0.3);
}

TEST_CASE("synchronous_pair") {
    const auto f = ou_field(1.0, 0.5);
    const TimeGrid g = TimeGrid::uniform(1.0, 100);
    const Vector x = Vector::Constant(1, 0.4);
    const auto same = synchronous_pair(f, f, x, x, g, 3);
    CHECK(same.paths[0] == same.paths[1]);
    CHECK(same.noise == NoiseMode::shared);
    // each component is the single-SDE path on the same stream
    CHECK(same.paths[0] == euler_maruyama(f, x, g, 3).paths[0]);

    const auto h = heat_field(2, 0.7);
    Vector x1(2), x2(2);
    x1 << 0.0, 1.0;
    x2 << 2.0, -1.0;
    const auto add = synchronous_pair(h, h, x1, x2, g, 5, 0, true);
    CHECK(add.increments[0] == add.increments[1]);
    for (Eigen::Index k = 0; k < add.paths[0].cols(); ++k)
        CHECK(std::abs((add.paths[0].col(k) - add.paths[1].col(k)).norm() - (x1 - x2).norm()) < 1e-12);
}

TEST_CASE("synchronous coupling of two OU drifts against the coupled moment ODE") {
    const double th1 = 1.0, th2 = 2.0, s2 = 1.0, T = 1.0, x1 = 1.0, x2 = -0.5;  // sigma^2 = 2a = 1
    // Oracle: joint moments of (X1, X2), m' = A m, C' = A C + C A' + s2 [[1,1],[1,1]], RK4.
    auto rhs = [&](const std::array<double, 5>& y) {
        const double m1 = y[0], m2 = y[1], c11 = y[2], c12 = y[3], c22 = y[4];
        return std::array<double, 5>{-th1 * m1, -th2 * m2, -2 * th1 * c11 + s2, -(th1 + th2) * c12 + s2,
                                     -2 * th2 * c22 + s2};
    };
    std::array<double, 5> y{x1, x2, 0, 0, 0};
    const int n_ode = 10000;
    const double dt = T / n_ode;
    for (int i = 0; i < n_ode; ++i) {
        auto add = [](std::array<double, 5> a, const std::array<double, 5>& b, double s) {
            for (int j = 0; j < 5; ++j) a[j] += s * b[j];
            return a;
        };
        const auto k1 = rhs(y), k2 = rhs(add(y, k1, dt / 2)), k3 = rhs(add(y, k2, dt / 2)), k4 = rhs(add(y, k3, dt));
        for (int j = 0; j < 5; ++j) y[j] += dt / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    }
    const double expected = (y[0] - y[1]) * (y[0] - y[1]) + y[2] + y[4] - 2 * y[3];

    const auto [p1, p2] = synchronous_pairs(ou_field(th1, 0.5), ou_field(th2, 0.5), Vector::Constant(1, x1),
                                            Vector::Constant(1, x2), TimeGrid::uniform(T, 1000), 10000, 7);
    const Empirical e1 = p1.terminal(), e2 = p2.terminal();
    const Vector sq = (e1.points() - e2.points()).row(0).array().square().matrix().transpose();
    const double mean = sq.mean();
    const double se = std::sqrt((sq.array() - mean).square().sum() / (sq.size() - 1.0) / sq.size());
    CHECK(std::abs(mean - expected) < 3.0 * se);

    // marginals: each side matches its own OU moments
    const Moments m1 = coordinate_moments(e1);
    CHECK(std::abs(m1.mean - x1 * std::exp(-th1 * T)) < 3.0 * m1.mean_se());
    const Moments m2 = coordinate_moments(e2);
    CHECK(std::abs(m2.var - 0.5 / th2 * (1 - std::exp(-2 * th2 * T))) < 3.0 * m2.var_se());
}

TEST_CASE("bridge paths") {
    const auto f1 = heat_field(1, 1.0), f2 = heat_field(1, 2.0);
    const Vector x = Vector::Constant(1, 0.5);
    const TimeGrid g = TimeGrid::uniform(1.0, 64);

    CHECK_THROWS_AS(BridgeSpec(f1, f2, 1.0, 0.75, 1.0), InvalidArgument);
    CHECK_THROWS_AS(BridgeSpec(f1, f2, 2.0, 0.5, 1.0), InvalidArgument);

    // Grid refinement inserts t0 = 0.3 * 0.9 and stops at t1 = 0.9.
    const BridgeSpec spec(f1, f2, 0.9, 0.3, 1.0);
    const auto path = bridge_path(spec, x, g, 4);
    CHECK(path.grid.horizon() == doctest::Approx(0.9));
    CHECK(path.grid.index_of(0.27).has_value());

    // Same generator on both sides: identical to plain Euler-Maruyama on the refined grid.
    const BridgeSpec trivial(f1, f1, 0.9, 0.3, 1.0);
    CHECK(bridge_path(trivial, x, g, 4).paths[0] == euler_maruyama(f1, x, path.grid, 4).paths[0]);

    // t0 = t1 gives the field1 law, t0 = 0 the field2 law.
    const auto first = switched_ensemble(f1, f2, 1.0, x, g, 10000, 8);
    const Moments m1 = coordinate_moments(first.terminal());
    CHECK(std::abs(m1.var - 2.0) < 3.0 * m1.var_se());
    const auto second = switched_ensemble(f1, f2, 0.0, x, g, 10000, 8);
    const Moments m2 = coordinate_moments(second.terminal());
    CHECK(std::abs(m2.var - 4.0) < 3.0 * m2.var_se());
    // one grid step of field1
    const auto near = switched_ensemble(f1, f2, g.nodes()[1], x, g, 10000, 8);
    const Moments m3 = coordinate_moments(near.terminal());
    CHECK(std::abs(m3.var - (4.0 - 2.0 * g.nodes()[1])) < 3.0 * m3.var_se());

    // half and half: 2 t0 + 4 (t1 - t0)
    const auto half = bridge_ensemble(BridgeSpec(f1, f2, 1.0, 0.5, 1.0), x, g, 10000, 9);
    const Moments m4 = coordinate_moments(half.terminal());
    CHECK(std::abs(m4.var - 3.0) < 3.0 * m4.var_se());
    CHECK(std::abs(m4.mean - 0.5) < 3.0 * m4.mean_se());
}

TEST_CASE("PathEnsemble CSV and slices") {
    auto e = simulate_ensemble(heat_field(2, 0.5), Vector::Zero(2), TimeGrid::uniform(1.0, 3), 3, 1);
    std::stringstream os;
    e.write_csv(os);
    std::string header;
    std::getline(os, header);
    CHECK(header == "path,t,x1,x2");
    int rows = 0;
    for (std::string line; std::getline(os, line);) ++rows;
    CHECK(rows == 12);
    e.aborted = {1};
    CHECK(e.terminal().size() == 2);
}

TEST_CASE("exponential moment certificate") {
    SemimartingaleWitness zero;
    zero.k1 = 1.0;
    zero.lambda = 1.0;
    zero.k = 10.0;
    zero.t0 = 0.1;
    PathEnsemble flat;
    flat.grid = TimeGrid::uniform(0.1, 2);
    flat.paths.assign(5, Matrix::Zero(1, 3));
    const auto r0 = exp_moment_certificate(zero, flat);
    CHECK(r0.left.value() == 1.0);
    CHECK(r0.right.value() == 1.0);
    CHECK(r0.verdict == Verdict::holds);

    SemimartingaleWitness w;
    const int d = 2;
    w.k1 = 4.0;
    w.lambda = 0.2;
    w.t0 = 0.1;
    w.k = 8.0;  // 8 (1 - 0.4) = 4.8 >= 4 (1.1) = 4.4
    w.compensator = [d](double t) { return d * t; };
    CHECK(w.satisfies_r_star());
    const auto xi = brownian_squared_norm(d, TimeGrid::uniform(w.t0, 10), 20000, 3);
    const auto r = exp_moment_certificate(w, xi);
    CHECK(r.verdict == Verdict::holds);
    CHECK(r.right.value() == doctest::Approx(std::exp(w.lambda * d * w.t0)));
    // E|B_t|^2 = d t
    CHECK(xi.terminal().mean()(0) == doctest::Approx(d * w.t0).epsilon(0.05));

    SemimartingaleWitness bad = w;
    bad.k = 1.0;
    CHECK_FALSE(bad.satisfies_r_star());
    CHECK_THROWS_AS(exp_moment_certificate(bad, xi), InvalidArgument);
    SemimartingaleWitness late = w;
    late.t0 = 0.3;  // t0 >= 1/k1
    CHECK_THROWS_AS(late.validate(), InvalidArgument);
}
