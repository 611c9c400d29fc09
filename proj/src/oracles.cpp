#include "bicouple/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "bicouple/parallel.hpp"
#include "bicouple/rng.hpp"

namespace bicouple {

namespace {

void check_spd(const Matrix& a, const char* what) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || !(lo > 1e-12 * hi)) throw InvalidArgument(std::string(what) + " is not positive definite");
}

Matrix symmetrised(const Matrix& m) { return 0.5 * (m + m.transpose()); }

GaussianMoments propagate_constant(const LinearSDESpec& spec, const GaussianMoments& law, double h) {
    const Eigen::Index d = spec.dim();
    Matrix aug = Matrix::Zero(d + 1, d + 1);
    aug.topLeftCorner(d, d) = spec.A * h;
    aug.topRightCorner(d, 1) = spec.c * h;
    const Matrix e_aug = aug.exp();
    const Matrix phi = e_aug.topLeftCorner(d, d);
    const Vector mean = phi * law.mean + e_aug.topRightCorner(d, 1);

    // Van Loan: exp([[-A, Q], [0, A']] h) = [[., F12], [0, F22]], Qd = F22' F12.
    const Matrix Q = spec.Sigma * spec.Sigma.transpose();
    Matrix vl = Matrix::Zero(2 * d, 2 * d);
    vl.topLeftCorner(d, d) = -spec.A * h;
    vl.topRightCorner(d, d) = Q * h;
    vl.bottomRightCorner(d, d) = spec.A.transpose() * h;
    const Matrix e_vl = vl.exp();
    const Matrix qd = e_vl.bottomRightCorner(d, d).transpose() * e_vl.topRightCorner(d, d);
    return {mean, symmetrised(phi * law.cov * phi.transpose() + qd)};
}

GaussianMoments propagate_rk4(const LinearSDESpec& spec, const GaussianMoments& law, double t_from, double t_to) {
    const double span = t_to - t_from;
    const int steps = std::max(200, static_cast<int>(std::ceil(span * 2000.0)));
    const double h = span / steps;
    const auto rhs = [&spec](double t, const Vector& m, const Matrix& C, Vector& dm, Matrix& dC) {
        const Matrix A = spec.drift_matrix(t);
        const Matrix S = spec.sigma(t);
        dm = A * m + spec.drift_offset(t);
        dC = A * C + C * A.transpose() + S * S.transpose();
    };
    Vector m = law.mean;
    Matrix C = law.cov;
    Vector k1m, k2m, k3m, k4m;
    Matrix k1c, k2c, k3c, k4c;
    for (int i = 0; i < steps; ++i) {
        const double t = t_from + i * h;
        rhs(t, m, C, k1m, k1c);
        rhs(t + h / 2, m + h / 2 * k1m, C + h / 2 * k1c, k2m, k2c);
        rhs(t + h / 2, m + h / 2 * k2m, C + h / 2 * k2c, k3m, k3c);
        rhs(t + h, m + h * k3m, C + h * k3c, k4m, k4c);
        m += h / 6 * (k1m + 2 * k2m + 2 * k3m + k4m);
        C += h / 6 * (k1c + 2 * k2c + 2 * k3c + k4c);
    }
    return {m, symmetrised(C)};
}

// Score of a Gaussian kernel density estimate of the cloud at y.
Vector kde_score(const Empirical& cloud, double bandwidth, const Vector& y) {
    const Eigen::Index n = cloud.size();
    Vector logw(n);
    for (Eigen::Index j = 0; j < n; ++j)
        logw(j) = std::log(cloud.weight(j)) - (cloud.point(j) - y).squaredNorm() / (2 * bandwidth * bandwidth);
    const double top = logw.maxCoeff();
    const Vector w = (logw.array() - top).exp().matrix();
    const Vector centroid = cloud.points() * w / w.sum();
    return (centroid - y) / (bandwidth * bandwidth);
}

double silverman_bandwidth(const Empirical& cloud) {
    const auto d = static_cast<double>(cloud.dim());
    const auto n = static_cast<double>(cloud.size());
    const double sd = std::sqrt(cloud.covariance().trace() / d);
    if (!(sd > 0.0)) throw InvalidArgument("particle law is degenerate; no kernel score available");
    return sd * std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
}

Vector phi_with_score(const CoefficientField& f1, const CoefficientField& f2, double s, const Vector& y,
                      const Vector& score) {
    const Matrix gap = f1.diffusion(s, y) - f2.diffusion(s, y);
    return gap * score + f1.divergence(s, y) - f2.divergence(s, y) + f2.drift(s, y) - f1.drift(s, y);
}

} // namespace

// -------------------------------------------------------------- LinearSDESpec

LinearSDESpec LinearSDESpec::constant(Matrix A, Vector c, Matrix Sigma, GaussianMoments initial, double horizon,
                                      std::string name) {
    LinearSDESpec s;
    s.name = std::move(name);
    s.A = std::move(A);
    s.c = std::move(c);
    s.Sigma = std::move(Sigma);
    s.initial = std::move(initial);
    s.horizon = horizon;
    s.validate();
    return s;
}

LinearSDESpec LinearSDESpec::heat(const Vector& x, double scale, double horizon) {
    const Eigen::Index d = x.size();
    return constant(Matrix::Zero(d, d), Vector::Zero(d), std::sqrt(2.0 * scale) * Matrix::Identity(d, d),
                    GaussianMoments::dirac(x), horizon, "heat");
}

LinearSDESpec LinearSDESpec::ou(const Vector& x, double theta, double scale, double horizon) {
    const Eigen::Index d = x.size();
    return constant(-theta * Matrix::Identity(d, d), Vector::Zero(d), std::sqrt(2.0 * scale) * Matrix::Identity(d, d),
                    GaussianMoments::dirac(x), horizon, "ou");
}

LinearSDESpec LinearSDESpec::started_at(GaussianMoments init) const {
    LinearSDESpec s = *this;
    s.initial = std::move(init);
    s.validate();
    return s;
}

void LinearSDESpec::validate() const {
    const Eigen::Index d = dim();
    if (d < 1 || A.cols() != d) throw DimensionMismatch("drift matrix must be square");
    if (c.size() != d) throw DimensionMismatch("drift offset dimension");
    if (Sigma.rows() != d) throw DimensionMismatch("diffusion factor must have d rows");
    if (initial.mean.size() != d || initial.cov.rows() != d || initial.cov.cols() != d)
        throw DimensionMismatch("initial law dimension");
    if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
    Eigen::SelfAdjointEigenSolver<Matrix> init(symmetrised(initial.cov), Eigen::EigenvaluesOnly);
    if (init.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, init.eigenvalues().maxCoeff()))
        throw InvalidMeasure("initial covariance must be positive semidefinite");
    for (int i = 0; i <= 4; ++i) check_spd(diffusion(horizon * i / 4.0), "diffusion matrix");
}

GaussianMoments propagate(const LinearSDESpec& spec, const GaussianMoments& law, double t_from, double t_to) {
    if (t_to < t_from) throw InvalidArgument("cannot propagate backwards in time");
    if (t_to > spec.horizon * (1 + 1e-12)) throw InvalidArgument("time beyond the spec horizon");
    if (t_to == t_from) return law;
    if (spec.time_homogeneous()) return propagate_constant(spec, law, t_to - t_from);
    return propagate_rk4(spec, law, t_from, t_to);
}

GaussianMoments linear_sde_moments(const LinearSDESpec& spec, double t) {
    if (t < 0.0) throw InvalidArgument("time must be nonnegative");
    return propagate(spec, spec.initial, 0.0, t);
}

Gaussian linear_sde_law(const LinearSDESpec& spec, double t) { return linear_sde_moments(spec, t).measure(); }

GaussianMoments bridge_moments_linear(const LinearSDESpec& spec1, const LinearSDESpec& spec2, const Vector& x1,
                                      double t0, double t1) {
    if (spec1.dim() != spec2.dim() || x1.size() != spec1.dim()) throw DimensionMismatch("bridge dimensions differ");
    if (!(t0 >= 0.0 && t0 <= t1)) throw InvalidArgument("bridge needs 0 <= t0 <= t1");
    const GaussianMoments at_t0 = propagate(spec1, GaussianMoments::dirac(x1), 0.0, t0);
    return propagate(spec2, at_t0, t0, t1);
}

Gaussian bridge_law_linear(const LinearSDESpec& spec1, const LinearSDESpec& spec2, const Vector& x1, double t0,
                           double t1) {
    return bridge_moments_linear(spec1, spec2, x1, t0, t1).measure();
}

CoefficientField to_field(const LinearSDESpec& spec) {
    spec.validate();
    CoefficientField f;
    f.dim = spec.dim();
    f.name = spec.name;
    f.drift_lipschitz = [spec](double t, const Vector& x) -> Vector {
        return spec.drift_matrix(t) * x + spec.drift_offset(t);
    };
    f.diffusion = [spec](double t, const Vector&) { return spec.diffusion(t); };
    f.diffusion_divergence = [d = spec.dim()](double, const Vector&) { return Vector::Zero(d); };
    if (spec.time_homogeneous())
        f.constant_sigma = spec.Sigma;
    else
        f.sigma = [spec](double t, const Vector&) { return spec.sigma(t); };
    const Matrix a = spec.diffusion(0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    Eigen::JacobiSVD<Matrix> svd(spec.drift_matrix(0.0));
    f.K = std::max({1.0, svd.singularValues()(0), eig.eigenvalues().maxCoeff(), 1.0 / eig.eigenvalues().minCoeff()});
    return f;
}

Vector score_gaussian(const Gaussian& g, const Vector& y) {
    if (y.size() != g.dim()) throw DimensionMismatch("score point dimension");
    return -g.solve(y - g.mean());
}

Vector phi_integrand(const CoefficientField& field1, const CoefficientField& field2, const Gaussian& law1, double s,
                     const Vector& y) {
    if (field1.dim != field2.dim || law1.dim() != field1.dim || y.size() != field1.dim)
        throw DimensionMismatch("phi integrand dimensions differ");
    return phi_with_score(field1, field2, s, y, score_gaussian(law1, y));
}

LawProvider LawProvider::from_spec(const LinearSDESpec& spec) {
    LawProvider p;
    p.gaussian = [spec](double s) { return linear_sde_law(spec, s); };
    return p;
}

LawProvider LawProvider::from_particles(std::function<Empirical(double)> cloud) {
    LawProvider p;
    p.particles = std::move(cloud);
    return p;
}

BogResult bog_rhs(const CoefficientField& field1, const CoefficientField& field2, double t, const LawProvider& law,
                  const BogOptions& options) {
    if (!law.gaussian && !law.particles) throw InvalidArgument("law provider supplies neither a Gaussian nor particles");
    if (field1.dim != field2.dim) throw DimensionMismatch("fields differ in dimension");
    if (!(t > 0.0)) throw InvalidArgument("BOG bound needs t > 0");
    if (options.nodes < 4 || options.n_mc < 2) throw InvalidArgument("BOG quadrature needs >= 4 nodes and >= 2 draws");
    const Eigen::Index d = field1.dim;

    // Head interval [0, t 1e-4] then geometric cells up to t.
    const double lo = t * 1e-4;
    std::vector<double> s{lo / 2}, w{lo};
    for (int k = 0; k < options.nodes; ++k) {
        const double a = lo * std::pow(1e4, static_cast<double>(k) / options.nodes);
        const double b = lo * std::pow(1e4, static_cast<double>(k + 1) / options.nodes);
        s.push_back(std::sqrt(a * b));
        w.push_back(b - a);
    }
    const std::size_t m = s.size();
    const auto quad_form = [&](double si, const Vector& y, const Vector& phi) {
        return phi.dot(field2.diffusion(si, y).llt().solve(phi));
    };

    BogResult r;
    r.nodes = s;
    r.integrand.assign(m, 0.0);
    if (law.gaussian) {
        std::vector<Vector> means(m);
        std::vector<Matrix> roots(m);
        std::vector<Gaussian> laws;
        laws.reserve(m);
        for (std::size_t k = 0; k < m; ++k) {
            laws.push_back(law.gaussian(s[k]));
            if (laws.back().dim() != d) throw DimensionMismatch("law provider dimension");
            means[k] = laws.back().mean();
            roots[k] = laws.back().cholesky().matrixL();
        }
        const std::size_t n = options.n_mc;
        Matrix vals(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        parallel_for(n, options.threads, [&](std::size_t i) {
            StreamRng rng(options.seed, i);
            std::normal_distribution<double> normal;
            Vector z(d);
            for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
            for (std::size_t k = 0; k < m; ++k) {
                const Vector y = means[k] + roots[k] * z;
                const Vector phi = phi_integrand(field1, field2, laws[k], s[k], y);
                vals(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = quad_form(s[k], y, phi);
            }
        });
        Eigen::Map<const Vector> weights(w.data(), static_cast<Eigen::Index>(m));
        const Vector per_draw = 0.5 * (vals.transpose() * weights);
        const double mean = per_draw.mean();
        const double var = (per_draw.array() - mean).square().sum() / static_cast<double>(n - 1);
        r.standard_error = std::sqrt(var / static_cast<double>(n));
        for (std::size_t k = 0; k < m; ++k) r.integrand[k] = vals.row(static_cast<Eigen::Index>(k)).mean();
    } else {
        double var_sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const Empirical cloud = law.particles(s[k]);
            if (cloud.dim() != d) throw DimensionMismatch("law provider dimension");
            const double bw = silverman_bandwidth(cloud);
            const Eigen::Index n = std::min<Eigen::Index>(cloud.size(), static_cast<Eigen::Index>(options.n_mc));
            Vector vals(n);
            parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
                const Vector y = cloud.point(static_cast<Eigen::Index>(i));
                const Vector phi = phi_with_score(field1, field2, s[k], y, kde_score(cloud, bw, y));
                vals(static_cast<Eigen::Index>(i)) = quad_form(s[k], y, phi);
            });
            r.integrand[k] = vals.mean();
            if (n > 1) var_sum += std::pow(0.5 * w[k], 2) * (vals.array() - vals.mean()).square().sum() / (n - 1.0) / n;
        }
        r.standard_error = std::sqrt(var_sum);
    }

    double total = 0.0;
    r.decade_increments.assign(4, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double piece = 0.5 * w[k] * r.integrand[k];
        total += piece;
        if (k == 0) continue;
        const int decade = std::clamp(static_cast<int>(std::floor(-std::log10(s[k] / t))), 0, 3);
        r.decade_increments[static_cast<std::size_t>(decade)] += piece;
    }
    r.truncated_value = total;
    const double last = r.decade_increments[3], prev = r.decade_increments[2];
    const bool overflow = total > options.overflow && last > 0.0;
    const bool log_growth = prev > 0.0 && last >= 0.9 * prev && last > 1e-12 * std::max(1.0, total);
    r.divergent = overflow || log_growth;
    r.value = r.divergent ? ExtendedReal::infinity() : ExtendedReal(total);
    return r;
}

ExtendedReal gaussian_log_power_moment(const Gaussian& pb, const Gaussian& p2, double q) {
    if (pb.dim() != p2.dim()) throw DimensionMismatch("power moment dimensions differ");
    if (!(q > 1.0)) throw InvalidArgument("power moment needs q > 1");
    const Matrix Pb = pb.precision(), P2 = p2.precision();
    const Matrix M = symmetrised(q * Pb + (1.0 - q) * P2);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * eig.eigenvalues().cwiseAbs().maxCoeff()))
        return ExtendedReal::infinity();
    const Eigen::LLT<Matrix> llt(M);
    const double log_det_m = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Vector h = q * Pb * pb.mean() + (1.0 - q) * P2 * p2.mean();
    const double value = -0.5 * q * pb.log_det() - 0.5 * (1.0 - q) * p2.log_det() - 0.5 * log_det_m +
                         0.5 * h.dot(llt.solve(h)) - 0.5 * q * pb.mean().dot(Pb * pb.mean()) -
                         0.5 * (1.0 - q) * p2.mean().dot(P2 * p2.mean());
    return value;
}

} // namespace bicouple
