#include <doctest.h>

#include <sstream>

#include "bicouple/measures.hpp"
#include "bicouple/measures_io.hpp"

using namespace bicouple;

TEST_CASE("gaussian_sample: 1-D sample mean") {
    const Empirical s = gaussian_sample(Gaussian::standard(1), 100000, 7);
    CHECK(s.size() == 100000);
    CHECK(std::abs(s.mean()(0)) < 0.02);
}

TEST_CASE("gaussian_sample: 2-D sample covariance against direct accumulation") {
    const Empirical s = gaussian_sample(Gaussian::standard(2), 100000, 11);
    // Independent accumulation loop, no Eigen reductions.
    double m[2] = {0, 0}, c[2][2] = {{0, 0}, {0, 0}};
    const auto n = static_cast<double>(s.size());
    for (Eigen::Index j = 0; j < s.size(); ++j)
        for (int i = 0; i < 2; ++i) m[i] += s.point(j)(i) / n;
    for (Eigen::Index j = 0; j < s.size(); ++j)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) c[a][b] += (s.point(j)(a) - m[a]) * (s.point(j)(b) - m[b]) / n;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            CHECK(std::abs(c[a][b] - (a == b ? 1.0 : 0.0)) < 0.05);
            CHECK(s.covariance()(a, b) == doctest::Approx(c[a][b]).epsilon(1e-9));
        }
}

TEST_CASE("gaussian_sample is reproducible and seed-sensitive") {
    Matrix cov(2, 2);
    cov << 2.0, 0.3, 0.3, 1.0;
    const Gaussian g(Vector::Constant(2, 1.5), cov);
    const Empirical a = gaussian_sample(g, 500, 3), b = gaussian_sample(g, 500, 3), c = gaussian_sample(g, 500, 4);
    CHECK(a.points() == b.points());
    CHECK(a.points() != c.points());
    CHECK_THROWS_AS(gaussian_sample(g, 0, 1), InvalidArgument);
}

TEST_CASE("Gaussian invariants") {
    // N(m, 0+ I): eigenvalue ratio below 1e-12
    CHECK_THROWS_AS(Gaussian(Vector::Zero(2), (Matrix(2, 2) << 1.0, 0.0, 0.0, 1e-14).finished()), InvalidMeasure);
    CHECK_THROWS_AS(Gaussian(Vector::Zero(1), Matrix::Zero(1, 1)), InvalidMeasure);
    CHECK_THROWS_AS(Gaussian(Vector::Zero(2), (Matrix(2, 2) << 1.0, 0.5, 0.4, 1.0).finished()), InvalidMeasure);
    CHECK_THROWS_AS(Gaussian(Vector::Zero(2), Matrix::Identity(3, 3)), DimensionMismatch);
    CHECK_NOTHROW(Gaussian(Vector::Zero(2), Matrix::Identity(2, 2)));
}

TEST_CASE("second_moment") {
    CHECK(second_moment(dirac(Vector::Zero(3))) == 0.0);
    for (int d = 1; d <= 4; ++d) CHECK(second_moment(Gaussian::standard(d)) == doctest::Approx(d));
    Vector e1(2), e2(2);
    e1 << 1, 0;
    e2 << 0, 1;
    CHECK(second_moment(empirical_from_points({e1, e2})) == doctest::Approx(1.0));
}

TEST_CASE("second_moment of a sample tracks the Gaussian value") {
    Matrix cov(2, 2);
    cov << 1.0, 0.2, 0.2, 0.5;
    Vector mean(2);
    mean << 0.5, -1.0;
    const Gaussian g(mean, cov);
    const Eigen::Index n = 20000;
    const Empirical s = gaussian_sample(g, n, 21);
    // |X|^2 has variance 2 tr(C^2) + 4 m'Cm for a Gaussian X.
    const double var = 2.0 * (cov * cov).trace() + 4.0 * mean.dot(cov * mean);
    const double se = std::sqrt(var / static_cast<double>(n));
    CHECK(std::abs(second_moment(s) - second_moment(g)) < 3.0 * se);
}

TEST_CASE("empirical_from_points") {
    Vector x(2);
    x << 1, 2;
    const Empirical one = empirical_from_points({x});
    CHECK(one.size() == 1);
    CHECK(one.weight(0) == 1.0);

    const Empirical w = empirical_from_points({x, x}, {2.0, 2.0});
    CHECK(w.weight(0) == 0.5);
    CHECK(w.weight(1) == 0.5);

    CHECK_THROWS_AS(empirical_from_points({x, Vector::Zero(3)}), DimensionMismatch);
    CHECK_THROWS_AS(empirical_from_points(std::vector<Vector>{}), InvalidMeasure);
    CHECK_THROWS_AS(empirical_from_points({x, x}, {1.0, -1.0}), InvalidMeasure);
    CHECK(std::abs(w.weights().sum() - 1.0) < 1e-12);
}

TEST_CASE("empirical CSV and JSON round trip") {
    const Empirical m(gaussian_sample(Gaussian::standard(3), 20, 5).points(),
                      Vector::LinSpaced(20, 1.0, 20.0));
    std::stringstream csv;
    write_csv(csv, m);
    const Empirical back = read_empirical_csv(csv);
    CHECK(back.dim() == 3);
    CHECK((back.points() - m.points()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.weights() - m.weights()).cwiseAbs().maxCoeff() < 1e-12);

    const auto j = to_json(m);
    CHECK(j["dim"] == 3);
    const Empirical from_json = empirical_from_json(j);
    CHECK((from_json.points() - m.points()).cwiseAbs().maxCoeff() < 1e-12);

    std::stringstream bare("0.5\n1.5\n");
    CHECK(read_empirical_csv(bare).size() == 2);
}

TEST_CASE("resample keeps uniform clouds of the requested size") {
    const Empirical m = gaussian_sample(Gaussian::standard(1), 50, 1);
    CHECK(resample(m, 50, 9).points() == m.points());
    const Empirical r = resample(m, 80, 9);
    CHECK(r.size() == 80);
}
