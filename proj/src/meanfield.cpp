#include "bicouple/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "bicouple/parallel.hpp"
#include "bicouple/rng.hpp"
#include "bicouple/transport.hpp"

namespace bicouple {

namespace {

constexpr std::uint64_t kInitialStream = 0x1A17ULL;

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t salt) {
    return detail::mix64(seed ^ detail::mix64(salt + detail::kGolden));
}

Matrix symmetric_sqrt(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           eig.eigenvectors().transpose();
}

// Atoms sorted lexicographically so the snapshot does not depend on particle order.
Empirical snapshot(const Matrix& x) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.cols()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&x](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index k = 0; k < x.rows(); ++k)
            if (x(k, a) != x(k, b)) return x(k, a) < x(k, b);
        return false;
    });
    Matrix sorted(x.rows(), x.cols());
    for (std::size_t i = 0; i < order.size(); ++i) sorted.col(static_cast<Eigen::Index>(i)) = x.col(order[i]);
    return Empirical(std::move(sorted));
}

Empirical random_small_measure(StreamRng& rng, Eigen::Index d, double radius) {
    std::uniform_real_distribution<double> centre(-radius, radius);
    std::normal_distribution<double> normal;
    Vector c(d);
    for (Eigen::Index k = 0; k < d; ++k) c(k) = centre(rng);
    Matrix pts(d, 8);
    for (Eigen::Index j = 0; j < pts.cols(); ++j)
        for (Eigen::Index k = 0; k < d; ++k) pts(k, j) = c(k) + 0.5 * normal(rng);
    return Empirical(std::move(pts));
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

} // namespace

Eigen::Index law_dim(const Law& law) {
    return std::visit([](const auto& m) { return m.dim(); }, law);
}

Empirical law_cloud(const Law& law, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("a cloud needs at least one particle");
    const auto count = static_cast<Eigen::Index>(n);
    if (const auto* g = std::get_if<Gaussian>(&law)) return gaussian_sample(*g, count, seed);
    const auto& e = std::get<Empirical>(law);
    if (e.size() == count) return Empirical(e.points());
    return resample(e, count, seed);
}

// -------------------------------------------------------- MVCoefficientField

Matrix MVCoefficientField::sigma_at(double t, const Vector& x, const Empirical& mu) const {
    if (constant_sigma) return *constant_sigma;
    if (sigma) return sigma(t, x, mu);
    return symmetric_sqrt(2.0 * diffusion(t, x, mu));
}

Vector MVCoefficientField::divergence(double t, const Vector& x, const Empirical& mu, double step) const {
    Vector div = Vector::Zero(dim);
    Vector xp = x, xm = x;
    for (Eigen::Index l = 0; l < dim; ++l) {
        xp(l) = x(l) + step;
        xm(l) = x(l) - step;
        div += (diffusion(t, xp, mu).col(l) - diffusion(t, xm, mu).col(l)) / (2.0 * step);
        xp(l) = xm(l) = x(l);
    }
    return div;
}

MVCoefficientField MVCoefficientField::from_field(const CoefficientField& field) {
    MVCoefficientField f;
    f.dim = field.dim;
    f.name = field.name;
    f.drift = [field](double t, const Vector& x, const Empirical&) { return field.drift(t, x); };
    f.diffusion = [field](double t, const Vector& x, const Empirical&) { return field.diffusion(t, x); };
    if (field.constant_sigma)
        f.constant_sigma = field.constant_sigma;
    else
        f.sigma = [field](double t, const Vector& x, const Empirical&) { return field.sigma_at(t, x); };
    f.distribution_free = true;
    f.K = field.K;
    f.modulus = field.modulus;
    return f;
}

MVCoefficientField mean_field_ou(Eigen::Index dim, double theta, double sigma, double kappa, double dini_strength,
                                 double alpha) {
    if (dim < 1) throw InvalidArgument("dimension must be >= 1");
    if (!(sigma > 0.0)) throw InvalidArgument("mean-field OU needs sigma > 0");
    if (kappa < 0.0 || dini_strength < 0.0) throw InvalidArgument("kappa and the Dini strength must be nonnegative");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("Dini exponent must lie in (0, 1]");
    MVCoefficientField f;
    f.dim = dim;
    f.name = "mean-field-ou";
    f.drift = [theta, dini_strength, alpha](double, const Vector& x, const Empirical& mu) -> Vector {
        Vector b = theta * (mu.mean() - x);
        if (dini_strength > 0.0)
            for (Eigen::Index k = 0; k < x.size(); ++k) {
                const double r = std::abs(x(k));
                const double sign = x(k) > 0.0 ? 1.0 : (x(k) < 0.0 ? -1.0 : 0.0);
                b(k) -= dini_strength * sign * std::min(1.0, std::pow(r, alpha));
            }
        return b;
    };
    const double base = 0.5 * sigma * sigma;
    f.diffusion = [base, kappa, dim](double, const Vector& x, const Empirical& mu) -> Matrix {
        const double scale = kappa > 0.0 ? 1.0 + kappa / (1.0 + (x - mu.mean()).squaredNorm()) : 1.0;
        return base * scale * Matrix::Identity(dim, dim);
    };
    if (kappa == 0.0) {
        f.constant_sigma = sigma * Matrix::Identity(dim, dim);
    } else {
        f.sigma = [base, kappa, dim](double, const Vector& x, const Empirical& mu) -> Matrix {
            const double scale = 1.0 + kappa / (1.0 + (x - mu.mean()).squaredNorm());
            return std::sqrt(2.0 * base * scale) * Matrix::Identity(dim, dim);
        };
    }
    f.K = std::max({1.0, theta, base * (1.0 + kappa), 1.0 / base, dini_strength * std::sqrt(double(dim)),
                    base * kappa * std::sqrt(double(dim))});
    f.modulus = DiniModulus::power(alpha);
    return f;
}

MVFieldCheck check_mv_field(const MVCoefficientField& field, double horizon, int pairs, std::uint64_t seed,
                            double radius) {
    MVFieldCheck c;
    StreamRng rng(seed, 0);
    std::uniform_real_distribution<double> time(0.0, horizon), unit(-radius, radius);
    const Eigen::Index d = field.dim;
    for (int p = 0; p < pairs; ++p) {
        const Empirical mu = random_small_measure(rng, d, radius);
        const Empirical nu = random_small_measure(rng, d, radius);
        const double w2 = std::sqrt(optimal_coupling_discrete(mu, nu).cost);
        if (!(w2 > 0.0)) continue;
        const double t = time(rng);
        for (int q = 0; q < 4; ++q) {
            Vector x(d);
            for (Eigen::Index k = 0; k < d; ++k) x(k) = unit(rng);
            c.drift_ratio = std::max(c.drift_ratio, (field.drift(t, x, nu) - field.drift(t, x, mu)).norm() / w2);
            const Matrix gap = field.diffusion(t, x, nu) - field.diffusion(t, x, mu);
            c.diffusion_ratio = std::max(c.diffusion_ratio, Eigen::JacobiSVD<Matrix>(gap).singularValues()(0) / w2);
            c.divergence_ratio =
                std::max(c.divergence_ratio, (field.divergence(t, x, nu) - field.divergence(t, x, mu)).norm() / w2);
        }
    }
    const double limit = 1.05 * field.K;
    if (c.drift_ratio > limit) c.problems.push_back("drift W2-Lipschitz ratio " + fmt(c.drift_ratio) + " exceeds K");
    if (c.diffusion_ratio > limit)
        c.problems.push_back("diffusion W2-Lipschitz ratio " + fmt(c.diffusion_ratio) + " exceeds K");
    if (c.divergence_ratio > limit)
        c.problems.push_back("divergence W2-Lipschitz ratio " + fmt(c.divergence_ratio) + " exceeds K");
    c.ok = c.problems.empty();
    return c;
}

LipschitzEstimate estimate_lipschitz(const MVCoefficientField& field, double horizon, int samples, std::uint64_t seed,
                                     double radius) {
    LipschitzEstimate est;
    StreamRng rng(seed, 1);
    std::uniform_real_distribution<double> time(0.0, horizon), unit(-radius, radius), gap(1e-3, 1.0);
    const Eigen::Index d = field.dim;
    for (int s = 0; s < samples; ++s) {
        const double t = time(rng);
        const Empirical mu = random_small_measure(rng, d, radius);
        const Empirical nu = random_small_measure(rng, d, radius);
        Vector x(d), dir(d);
        for (Eigen::Index k = 0; k < d; ++k) {
            x(k) = unit(rng);
            dir(k) = unit(rng);
        }
        if (dir.norm() == 0.0) dir(0) = 1.0;
        const Vector y = x + gap(rng) * dir.normalized();
        est.space = std::max(est.space, (field.drift(t, x, mu) - field.drift(t, y, mu)).norm() / (x - y).norm());
        const double w2 = std::sqrt(optimal_coupling_discrete(mu, nu).cost);
        if (w2 > 0.0) est.law = std::max(est.law, (field.drift(t, x, mu) - field.drift(t, x, nu)).norm() / w2);
    }
    return est;
}

// ------------------------------------------------------------ particle system

PathEnsemble evolve_cloud(const MVCoefficientField& field, const Matrix& start, const TimeGrid& grid,
                          std::uint64_t seed, const ParticleOptions& options) {
    if (start.rows() != field.dim) throw DimensionMismatch("initial cloud dimension differs from the field's");
    if (start.cols() < 1) throw InvalidArgument("particle system needs at least one particle");
    if (!start.allFinite()) throw InvalidArgument("initial cloud must be finite");
    const auto n = static_cast<std::size_t>(start.cols());
    if (!options.streams.empty() && options.streams.size() != n)
        throw DimensionMismatch("stream list length differs from the particle count");
    const Eigen::Index d = field.dim;
    const auto& t = grid.nodes();
    const auto nodes = static_cast<Eigen::Index>(t.size());

    PathEnsemble e;
    e.grid = grid;
    e.seed = seed;
    e.paths.assign(n, Matrix(d, nodes));
    std::vector<detail::BrownianIncrements> noise;
    noise.reserve(n);
    for (std::size_t i = 0; i < n; ++i) noise.emplace_back(seed, options.streams.empty() ? i : options.streams[i]);

    Matrix x = start;
    for (std::size_t i = 0; i < n; ++i) e.paths[i].col(0) = x.col(static_cast<Eigen::Index>(i));
    const Empirical placeholder(Matrix::Zero(d, 1));
    std::vector<char> failed(n, 0);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double h = t[k + 1] - t[k];
        const Empirical mu = field.distribution_free ? placeholder : snapshot(x);
        Matrix next(d, static_cast<Eigen::Index>(n));
        parallel_for(n, options.threads, [&](std::size_t i) {
            const auto col = static_cast<Eigen::Index>(i);
            Vector xi = x.col(col), dw(d);
            noise[i].draw(dw, h);
            detail::em_update(xi, field.drift(t[k], xi, mu), field.sigma_at(t[k], xi, mu), dw, h);
            if (!xi.allFinite()) failed[i] = 1;
            next.col(col) = xi;
        });
        for (std::size_t i = 0; i < n; ++i)
            if (failed[i]) e.aborted.push_back(i);
        if (!e.aborted.empty())
            throw BlowUpError("particle system became non-finite; retry with step " + fmt(grid.max_step() / 2.0),
                              grid.max_step() / 2.0);
        x = std::move(next);
        for (std::size_t i = 0; i < n; ++i) e.paths[i].col(static_cast<Eigen::Index>(k + 1)) = x.col(static_cast<Eigen::Index>(i));
    }
    return e;
}

PathEnsemble evolve_particles(const MVCoefficientField& field, const Law& init, std::size_t n, const TimeGrid& grid,
                              std::uint64_t seed, const ParticleOptions& options) {
    if (law_dim(init) != field.dim) throw DimensionMismatch("initial law dimension differs from the field's");
    const Empirical cloud = law_cloud(init, n, derived_seed(seed, kInitialStream));
    return evolve_cloud(field, cloud.points(), grid, seed, options);
}

Empirical flow_map(const MVCoefficientField& field, const Law& mu0, double t, std::size_t n, const TimeGrid& grid,
                   std::uint64_t seed, const ParticleOptions& options) {
    if (t < 0.0 || t > grid.horizon()) throw InvalidArgument("flow time outside [0, T]");
    if (law_dim(mu0) != field.dim) throw DimensionMismatch("initial law dimension differs from the field's");
    if (t == 0.0) return law_cloud(mu0, n, derived_seed(seed, kInitialStream));
    return evolve_particles(field, mu0, n, grid.truncated(t), seed, options).terminal();
}

double cloud_w2(const Empirical& a, const Empirical& b) {
    if (a.dim() == 1 && b.dim() == 1) return w2_empirical_1d(a, b);
    return w2_empirical_ot(a, b).distance;
}

// ------------------------------------------------------------------ stability

ExperimentReport w2_stability_experiment(const MVCoefficientField& field, const Law& nu1, const Law& nu2,
                                         const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                                         const StabilityOptions& options) {
    if (law_dim(nu1) != field.dim || law_dim(nu2) != field.dim) throw DimensionMismatch("law dimension differs");
    if (n < 2) throw InvalidArgument("stability experiment needs at least two particles");
    if (options.report_points < 1) throw InvalidArgument("need at least one report time");
    const std::uint64_t init_seed = derived_seed(seed, kInitialStream);
    const Empirical c1 = law_cloud(nu1, n, init_seed);
    const Empirical c2 = law_cloud(nu2, n, init_seed);

    // Optimal pairing of the two samples; partner i of c1 becomes column i of start2.
    std::vector<Eigen::Index> partner;
    if (field.dim == 1) {
        std::vector<Eigen::Index> o1(n), o2(n);
        std::iota(o1.begin(), o1.end(), Eigen::Index{0});
        std::iota(o2.begin(), o2.end(), Eigen::Index{0});
        std::sort(o1.begin(), o1.end(), [&](auto a, auto b) { return c1.points()(0, a) < c1.points()(0, b); });
        std::sort(o2.begin(), o2.end(), [&](auto a, auto b) { return c2.points()(0, a) < c2.points()(0, b); });
        partner.assign(n, 0);
        for (std::size_t r = 0; r < n; ++r) partner[static_cast<std::size_t>(o1[r])] = o2[r];
    } else {
        partner = solve_assignment(squared_distance_matrix(c1, c2));
    }
    Matrix start2(field.dim, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) start2.col(static_cast<Eigen::Index>(i)) = c2.point(partner[i]);
    const double w0 = std::sqrt((c1.points() - start2).colwise().squaredNorm().mean());

    ParticleOptions popts;
    popts.threads = options.threads;
    const PathEnsemble e1 = evolve_cloud(field, c1.points(), grid, seed, popts);
    const PathEnsemble e2 = evolve_cloud(field, start2, grid, seed, popts);

    const std::size_t steps = grid.steps();
    const int count = static_cast<int>(std::min<std::size_t>(steps, static_cast<std::size_t>(options.report_points)));
    ReportSeries series;
    double sup_ratio = 0.0, sup_w2 = 0.0, tolerance = 0.0;
    for (int r = 1; r <= count; ++r) {
        const std::size_t node = steps * static_cast<std::size_t>(r) / static_cast<std::size_t>(count);
        const Empirical a = e1.slice(node), b = e2.slice(node);
        const double w2 = cloud_w2(a, b);
        sup_w2 = std::max(sup_w2, w2);
        series.grid.push_back(grid.nodes()[node]);
        if (w0 > 0.0) {
            const double ratio = w2 / w0;
            sup_ratio = std::max(sup_ratio, ratio);
            series.left.push_back(ratio);
            const Vector gaps = (a.points() - b.points()).colwise().squaredNorm().transpose();
            const double mean = gaps.mean();
            const double sd = std::sqrt((gaps.array() - mean).square().sum() / static_cast<double>(n - 1));
            const double se_sq_ratio = sd / std::sqrt(static_cast<double>(n)) / (w0 * w0);
            tolerance = std::max(tolerance, 3.0 * se_sq_ratio / (2.0 * std::max(ratio, 1e-3)));
        } else {
            series.left.push_back(w2);
        }
    }

    double bound = 0.0;
    nlohmann::json params = {{"particles", n},
                             {"horizon", grid.horizon()},
                             {"steps", steps},
                             {"initial_w2", w0},
                             {"field", field.name}};
    if (options.bound) {
        bound = *options.bound;
    } else {
        const LipschitzEstimate k = estimate_lipschitz(field, grid.horizon(), 64, seed);
        bound = options.slack_factor * std::exp(k.total() * grid.horizon());
        params["lipschitz_space"] = k.space;
        params["lipschitz_law"] = k.law;
        params["slack_factor"] = options.slack_factor;
    }
    params["bound"] = bound;
    series.right.assign(series.grid.size(), bound);

    ExperimentReport report;
    if (w0 > 0.0) {
        report = make_report("w2_stability", sup_ratio, bound, tolerance);
        params["lipschitz_ratio"] = sup_ratio;
    } else {
        report = make_report("w2_stability", sup_w2, 0.0, tolerance);
        report.verdict = Verdict::degenerate;
        report.notes.emplace_back("initial laws coincide: W2(nu1, nu2) = 0 and the ratio is undefined");
    }
    report.params = std::move(params);
    report.seed = seed;
    report.notes.emplace_back("rate-only check: the bound c is measured, not a published constant");
    report.series = std::move(series);
    report.series->grid_name = "t";
    return report;
}

} // namespace bicouple
