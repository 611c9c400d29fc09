#include "bicouple/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "bicouple/parallel.hpp"
#include "bicouple/quadrature.hpp"

namespace bicouple {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix symmetric_sqrt(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

double spectral_norm(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

using Increments = detail::BrownianIncrements;

// Integrates one path; field_at(k) names the field used on step k. Returns
// false after a non-finite state (the remaining nodes are NaN).
template <typename FieldForStep>
bool integrate_path(const TimeGrid& grid, const Vector& x0, Increments& noise, FieldForStep&& field_at, Matrix& out,
                    Matrix* increments) {
    const auto& t = grid.nodes();
    const Eigen::Index d = x0.size();
    out.resize(d, static_cast<Eigen::Index>(t.size()));
    out.col(0) = x0;
    if (increments) increments->resize(d, static_cast<Eigen::Index>(grid.steps()));
    Vector x = x0, dw(d);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double h = t[k + 1] - t[k];
        const CoefficientField& f = field_at(k);
        noise.draw(dw, h);
        const Vector b = f.drift(t[k], x);
        const Matrix s = f.sigma_at(t[k], x);
        if (increments) increments->col(static_cast<Eigen::Index>(k)) = s * dw;
        detail::em_update(x, b, s, dw, h);
        if (!x.allFinite()) {
            out.rightCols(out.cols() - static_cast<Eigen::Index>(k) - 1).setConstant(kNaN);
            return false;
        }
        out.col(static_cast<Eigen::Index>(k + 1)) = x;
    }
    return true;
}

void check_start(const CoefficientField& field, const Vector& x0) {
    if (x0.size() != field.dim) throw DimensionMismatch("initial state dimension differs from the field's");
    if (!x0.allFinite()) throw InvalidArgument("initial state must be finite");
}

std::uint64_t stream_of(std::size_t path, bool antithetic) {
    return antithetic ? static_cast<std::uint64_t>(path & ~std::size_t{1}) : static_cast<std::uint64_t>(path);
}

bool negated(std::size_t path, bool antithetic) { return antithetic && (path & 1U); }

} // namespace

// ---------------------------------------------------------------- DiniModulus

DiniModulus::DiniModulus(std::function<double(double)> phi, std::string tag) : phi_(std::move(phi)), tag_(std::move(tag)) {
    if (!phi_) throw InvalidArgument("Dini modulus needs an evaluator");
}

DiniModulus DiniModulus::power(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("power modulus needs alpha in (0, 1]");
    return {[alpha](double r) { return r <= 0.0 ? 0.0 : std::pow(r, alpha); }, "power(" + fmt(alpha) + ")"};
}

DiniModulus DiniModulus::log_type(double gamma) {
    if (!(gamma > 1.0)) throw InvalidArgument("log-type modulus needs gamma > 1");
    return {[gamma](double r) { return r <= 0.0 ? 0.0 : std::pow(1.0 + std::log1p(1.0 / r), -gamma); },
            "log(" + fmt(gamma) + ")"};
}

DiniModulus::Check DiniModulus::check() const {
    Check c;
    if (std::abs(phi_(0.0)) > 0.0) c.problems.emplace_back("phi(0) != 0");
    constexpr int nodes = 64;
    std::vector<double> r(nodes), v(nodes);
    for (int i = 0; i < nodes; ++i) {
        r[i] = 2.0 * i / (nodes - 1);
        v[i] = phi_(r[i]);
        if (!std::isfinite(v[i]) || v[i] < 0.0) c.problems.emplace_back("phi not finite and nonnegative at " + fmt(r[i]));
    }
    for (int i = 0; i + 1 < nodes; ++i)
        if (v[i + 1] < v[i] - 1e-14) {
            c.problems.emplace_back("phi decreases near " + fmt(r[i]));
            break;
        }
    bool concave = true;
    for (int i = 0; i < nodes && concave; ++i)
        for (int j = i + 1; j < nodes && concave; ++j)
            if (phi_(0.5 * (r[i] + r[j])) < 0.5 * (v[i] + v[j]) - 1e-12) concave = false;
    if (!concave) c.problems.emplace_back("phi is not midpoint-concave on [0, 2]");

    // int_0^1 phi(s)/s ds = int_0^inf phi(e^{-u}) du, integrated over doubling blocks
    // while e^{-u} stays a normal double. A block ratio B_{k+1}/B_k = 2^{1-beta}
    // reads off a u^{-beta} tail; the tail is summed geometrically when beta > 1.
    const auto g = [this](double u) { return phi_(std::exp(-u)); };
    double total = adaptive_simpson(g, 0.0, 1.0, 1e-12);
    bool converged = false;
    double prev = 0.0;
    for (double lo = 1.0; lo <= 256.0; lo *= 2.0) {
        const double block = adaptive_simpson(g, lo, 2.0 * lo, 1e-12 * std::max(1.0, total));
        total += block;
        if (block <= 1e-9 * std::max(1.0, total)) {
            converged = true;
            break;
        }
        if (lo == 256.0 && prev > 0.0) {
            const double ratio = block / prev;
            if (ratio < 0.98) {
                total += block * ratio / (1.0 - ratio);
                converged = true;
            }
        }
        prev = block;
    }
    if (converged)
        c.integral = total;
    else
        c.problems.emplace_back("int_0^1 phi(s)/s ds does not converge");
    c.ok = c.problems.empty();
    return c;
}

// ----------------------------------------------------------- CoefficientField

Vector CoefficientField::drift(double t, const Vector& x) const {
    if (drift_dini && drift_lipschitz) return drift_dini(t, x) + drift_lipschitz(t, x);
    if (drift_dini) return drift_dini(t, x);
    if (drift_lipschitz) return drift_lipschitz(t, x);
    return Vector::Zero(dim);
}

Matrix CoefficientField::sigma_at(double t, const Vector& x) const {
    if (constant_sigma) return *constant_sigma;
    if (sigma) return sigma(t, x);
    return symmetric_sqrt(2.0 * diffusion(t, x));
}

Vector CoefficientField::divergence(double t, const Vector& x, double step) const {
    if (diffusion_divergence) return diffusion_divergence(t, x);
    Vector div = Vector::Zero(dim);
    Vector xp = x, xm = x;
    for (Eigen::Index l = 0; l < dim; ++l) {
        xp(l) = x(l) + step;
        xm(l) = x(l) - step;
        div += (diffusion(t, xp).col(l) - diffusion(t, xm).col(l)) / (2.0 * step);
        xp(l) = xm(l) = x(l);
    }
    return div;
}

CoefficientField make_field(Eigen::Index dim, VectorField b0, VectorField b1, const Matrix& a_const, std::string name) {
    if (a_const.rows() != dim || a_const.cols() != dim) throw DimensionMismatch("diffusion matrix shape");
    CoefficientField f;
    f.dim = dim;
    f.name = std::move(name);
    f.drift_dini = std::move(b0);
    f.drift_lipschitz = std::move(b1);
    f.diffusion = [a_const](double, const Vector&) { return a_const; };
    f.constant_sigma = symmetric_sqrt(2.0 * a_const);
    f.diffusion_divergence = [dim](double, const Vector&) { return Vector::Zero(dim); };
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(a_const, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() > 0.0)
        f.K = std::max({1.0, eig.eigenvalues().maxCoeff(), 1.0 / eig.eigenvalues().minCoeff()});
    return f;
}

FieldCheck check_field(const CoefficientField& field, double horizon, int samples, std::uint64_t seed, double radius) {
    if (!field.diffusion) throw InvalidArgument("field has no diffusion matrix");
    FieldCheck c;
    StreamRng rng(seed, 0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0), time(0.0, horizon), scale(1e-3, 1.0);
    const Eigen::Index d = field.dim;
    const auto random_point = [&] {
        Vector x(d);
        for (Eigen::Index i = 0; i < d; ++i) x(i) = radius * unit(rng);
        return x;
    };
    for (int s = 0; s < samples; ++s) {
        const double t = time(rng);
        const Vector x = random_point();
        Vector dir = random_point();
        if (dir.norm() == 0.0) dir(0) = 1.0;
        const Vector y = x + scale(rng) * dir.normalized();
        const double gap = (x - y).norm();
        if (field.drift_dini) c.max_b0 = std::max(c.max_b0, field.drift_dini(t, x).norm());
        const Matrix a = field.diffusion(t, x);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
        c.max_a_norm = std::max(c.max_a_norm, hi);
        c.max_a_inv_norm = std::max(c.max_a_inv_norm, lo > 0.0 ? 1.0 / lo : std::numeric_limits<double>::infinity());
        if (field.drift_lipschitz)
            c.lip_b1 = std::max(c.lip_b1, (field.drift_lipschitz(t, x) - field.drift_lipschitz(t, y)).norm() / gap);
        c.lip_a = std::max(c.lip_a, spectral_norm(a - field.diffusion(t, y)) / gap);
        const Matrix sig = field.sigma_at(t, x);
        c.max_sigma_error = std::max(c.max_sigma_error, (sig * sig.transpose() - 2.0 * a).cwiseAbs().maxCoeff());
    }
    const double K = field.K, slack = 1.05;
    if (c.max_b0 > K) c.problems.push_back("|b0| reaches " + fmt(c.max_b0) + " > K");
    if (c.max_a_norm > K) c.problems.push_back("||a|| reaches " + fmt(c.max_a_norm) + " > K");
    if (c.max_a_inv_norm > K) c.problems.push_back("||a^-1|| reaches " + fmt(c.max_a_inv_norm) + " > K");
    if (c.lip_b1 > K * slack) c.problems.push_back("Lipschitz quotient of b1 reaches " + fmt(c.lip_b1));
    if (c.lip_a > K * slack) c.problems.push_back("Lipschitz quotient of a reaches " + fmt(c.lip_a));
    if (c.max_sigma_error > 1e-8) c.problems.push_back("sigma sigma' differs from 2a by " + fmt(c.max_sigma_error));
    c.ok = c.problems.empty();
    return c;
}

// ------------------------------------------------------------------- TimeGrid

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) throw InvalidArgument("time grid needs at least two nodes");
    if (nodes_.front() != 0.0) throw InvalidArgument("time grid must start at 0");
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i)
        if (!(nodes_[i + 1] > nodes_[i]) || !std::isfinite(nodes_[i + 1]))
            throw InvalidArgument("time grid must be strictly increasing and finite");
}

TimeGrid TimeGrid::uniform(double horizon, std::size_t steps) {
    if (!(horizon > 0.0) || steps < 1) throw InvalidArgument("uniform grid needs T > 0 and at least one step");
    std::vector<double> t(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) t[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
    t.back() = horizon;
    return TimeGrid(std::move(t));
}

double TimeGrid::max_step() const {
    double h = 0.0;
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) h = std::max(h, nodes_[i + 1] - nodes_[i]);
    return h;
}

std::optional<std::size_t> TimeGrid::index_of(double t) const {
    const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
    if (it != nodes_.end() && *it == t) return static_cast<std::size_t>(it - nodes_.begin());
    return std::nullopt;
}

TimeGrid TimeGrid::refined_with(double t) const {
    if (!(t >= 0.0 && t <= horizon())) throw InvalidArgument("time " + fmt(t) + " lies outside the grid");
    if (index_of(t)) return *this;
    const double guard = 1e-12 * horizon();
    std::vector<double> out = nodes_;
    // A node off by round-off (0.32 against 64 * 0.005) is moved onto t.
    for (std::size_t i = 1; i + 1 < out.size(); ++i)
        if (std::abs(out[i] - t) < guard) {
            out[i] = t;
            return TimeGrid(std::move(out));
        }
    if (std::abs(out.front() - t) < guard || std::abs(out.back() - t) < guard)
        throw InvalidArgument("time " + fmt(t) + " is not representable: too close to an endpoint");
    out.insert(std::lower_bound(out.begin(), out.end(), t), t);
    return TimeGrid(std::move(out));
}

TimeGrid TimeGrid::truncated(double t) const {
    if (!(t > 0.0 && t <= horizon())) throw InvalidArgument("truncation time " + fmt(t) + " outside (0, T]");
    std::vector<double> out;
    for (double node : nodes_)
        if (node <= t) out.push_back(node);
    if (out.back() != t) {
        if (t - out.back() < 1e-12 * horizon()) out.back() = t;
        else out.push_back(t);
    }
    if (out.size() < 2) out = {0.0, t};
    return TimeGrid(std::move(out));
}

// --------------------------------------------------------------- PathEnsemble

Empirical PathEnsemble::slice(std::size_t node) const {
    if (node > grid.steps()) throw InvalidArgument("slice index beyond the grid");
    std::vector<std::size_t> keep;
    for (std::size_t p = 0; p < paths.size(); ++p)
        if (std::find(aborted.begin(), aborted.end(), p) == aborted.end()) keep.push_back(p);
    if (keep.empty()) throw InvalidMeasure("every path in the ensemble was aborted");
    Matrix pts(dim(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = paths[keep[i]].col(static_cast<Eigen::Index>(node));
    return Empirical(std::move(pts));
}

void PathEnsemble::write_csv(std::ostream& os) const {
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    os << "path,t";
    for (Eigen::Index k = 0; k < dim(); ++k) os << ",x" << (k + 1);
    os << '\n';
    const auto& t = grid.nodes();
    for (std::size_t p = 0; p < paths.size(); ++p)
        for (std::size_t i = 0; i < t.size(); ++i) {
            os << p << ',' << t[i];
            for (Eigen::Index k = 0; k < dim(); ++k) os << ',' << paths[p](k, static_cast<Eigen::Index>(i));
            os << '\n';
        }
    os.precision(old);
}

// ---------------------------------------------------------------- integrators

PathEnsemble euler_maruyama(const CoefficientField& field, const Vector& x0, const TimeGrid& grid, std::uint64_t seed,
                            std::uint64_t stream) {
    check_start(field, x0);
    PathEnsemble e;
    e.grid = grid;
    e.seed = seed;
    e.paths.resize(1);
    Increments noise(seed, stream, false);
    if (!integrate_path(grid, x0, noise, [&](std::size_t) -> const CoefficientField& { return field; }, e.paths[0], nullptr))
        throw BlowUpError("Euler-Maruyama state became non-finite; retry with step " + fmt(grid.max_step() / 2.0),
                          grid.max_step() / 2.0);
    return e;
}

PathEnsemble simulate_ensemble(const CoefficientField& field, const Vector& x0, const TimeGrid& grid,
                               std::size_t n_paths, std::uint64_t seed, const SimulationOptions& options) {
    return switched_ensemble(field, field, grid.horizon(), x0, grid, n_paths, seed, options);
}

PathEnsemble synchronous_pair(const CoefficientField& field1, const CoefficientField& field2, const Vector& x1,
                              const Vector& x2, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream,
                              bool record_increments) {
    check_start(field1, x1);
    check_start(field2, x2);
    PathEnsemble e;
    e.grid = grid;
    e.seed = seed;
    e.noise = NoiseMode::shared;
    e.paths.assign(2, Matrix());
    if (record_increments) e.increments.assign(2, Matrix());
    const auto& t = grid.nodes();
    const Eigen::Index d = x1.size();
    Increments noise(seed, stream, false);
    Vector y1 = x1, y2 = x2, dw(d);
    for (auto& p : e.paths) p.resize(d, static_cast<Eigen::Index>(t.size()));
    if (record_increments)
        for (auto& m : e.increments) m.resize(d, static_cast<Eigen::Index>(grid.steps()));
    e.paths[0].col(0) = x1;
    e.paths[1].col(0) = x2;
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double h = t[k + 1] - t[k];
        noise.draw(dw, h);
        const Vector b1 = field1.drift(t[k], y1), b2 = field2.drift(t[k], y2);
        const Matrix s1 = field1.sigma_at(t[k], y1), s2 = field2.sigma_at(t[k], y2);
        if (record_increments) {
            e.increments[0].col(static_cast<Eigen::Index>(k)) = s1 * dw;
            e.increments[1].col(static_cast<Eigen::Index>(k)) = s2 * dw;
        }
        detail::em_update(y1, b1, s1, dw, h);
        detail::em_update(y2, b2, s2, dw, h);
        if (!y1.allFinite() || !y2.allFinite())
            throw BlowUpError("coupled state became non-finite; retry with step " + fmt(grid.max_step() / 2.0),
                              grid.max_step() / 2.0);
        e.paths[0].col(static_cast<Eigen::Index>(k + 1)) = y1;
        e.paths[1].col(static_cast<Eigen::Index>(k + 1)) = y2;
    }
    return e;
}

std::pair<PathEnsemble, PathEnsemble> synchronous_pairs(const CoefficientField& field1, const CoefficientField& field2,
                                                        const Vector& x1, const Vector& x2, const TimeGrid& grid,
                                                        std::size_t n_pairs, std::uint64_t seed,
                                                        const SimulationOptions& options) {
    check_start(field1, x1);
    check_start(field2, x2);
    PathEnsemble first, second;
    for (auto* e : {&first, &second}) {
        e->grid = grid;
        e->seed = seed;
        e->noise = NoiseMode::shared;
        e->paths.assign(n_pairs, Matrix());
    }
    std::vector<char> failed(n_pairs, 0);
    parallel_for(n_pairs, options.threads, [&](std::size_t p) {
        try {
            auto pair = synchronous_pair(field1, field2, x1, x2, grid, seed, stream_of(p, false));
            first.paths[p] = std::move(pair.paths[0]);
            second.paths[p] = std::move(pair.paths[1]);
        } catch (const BlowUpError&) {
            failed[p] = 1;
            first.paths[p] = Matrix::Constant(x1.size(), static_cast<Eigen::Index>(grid.nodes().size()), kNaN);
            second.paths[p] = first.paths[p];
        }
    });
    for (std::size_t p = 0; p < n_pairs; ++p)
        if (failed[p]) {
            first.aborted.push_back(p);
            second.aborted.push_back(p);
        }
    return {std::move(first), std::move(second)};
}

BridgeSpec::BridgeSpec(CoefficientField field1, CoefficientField field2, double t1, double epsilon, double horizon)
    : field1_(std::move(field1)), field2_(std::move(field2)), t1_(t1), epsilon_(epsilon) {
    if (field1_.dim != field2_.dim) throw DimensionMismatch("bridge fields differ in dimension");
    if (!(t1 > 0.0 && t1 <= horizon)) throw InvalidArgument("bridge needs t1 in (0, T]");
    if (!(epsilon > 0.0 && epsilon <= 0.5)) throw InvalidArgument("bridge needs epsilon in (0, 1/2]");
}

PathEnsemble switched_path(const CoefficientField& field1, const CoefficientField& field2, double t_switch,
                           const Vector& x1, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream) {
    auto e = switched_ensemble(field1, field2, t_switch, x1, grid, 1, seed);
    if (stream != 0) {
        // Re-run on the requested stream.
        check_start(field1, x1);
        Increments noise(seed, stream, false);
        const auto& t = grid.nodes();
        if (!integrate_path(
                grid, x1, noise,
                [&](std::size_t k) -> const CoefficientField& { return t[k + 1] <= t_switch ? field1 : field2; },
                e.paths[0], nullptr))
            e.aborted = {0};
    }
    if (e.flagged())
        throw BlowUpError("switched path became non-finite; retry with step " + fmt(grid.max_step() / 2.0),
                          grid.max_step() / 2.0);
    return e;
}

PathEnsemble switched_ensemble(const CoefficientField& field1, const CoefficientField& field2, double t_switch,
                               const Vector& x1, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                               const SimulationOptions& options) {
    check_start(field1, x1);
    check_start(field2, x1);
    if (t_switch < 0.0) throw InvalidArgument("switch time must be nonnegative");
    if (t_switch > 0.0 && t_switch < grid.horizon() && !grid.index_of(t_switch))
        throw InvalidArgument("switch time must be a grid node");
    PathEnsemble e;
    e.grid = grid;
    e.seed = seed;
    e.paths.assign(n_paths, Matrix());
    if (options.record_increments) e.increments.assign(n_paths, Matrix());
    std::vector<char> failed(n_paths, 0);
    const auto& t = grid.nodes();
    parallel_for(n_paths, options.threads, [&](std::size_t p) {
        Increments noise(seed, stream_of(p, options.antithetic), negated(p, options.antithetic));
        const bool ok = integrate_path(
            grid, x1, noise,
            [&](std::size_t k) -> const CoefficientField& { return t[k + 1] <= t_switch ? field1 : field2; },
            e.paths[p], options.record_increments ? &e.increments[p] : nullptr);
        failed[p] = ok ? 0 : 1;
    });
    for (std::size_t p = 0; p < n_paths; ++p)
        if (failed[p]) e.aborted.push_back(p);
    return e;
}

namespace {

TimeGrid bridge_grid(const BridgeSpec& spec, const TimeGrid& grid) {
    if (grid.horizon() < spec.t1()) throw InvalidArgument("grid does not reach the bridge end time t1");
    return grid.truncated(spec.t1()).refined_with(spec.t0());
}

} // namespace

PathEnsemble bridge_path(const BridgeSpec& spec, const Vector& x1, const TimeGrid& grid, std::uint64_t seed,
                         std::uint64_t stream) {
    return switched_path(spec.field1(), spec.field2(), spec.t0(), x1, bridge_grid(spec, grid), seed, stream);
}

PathEnsemble bridge_ensemble(const BridgeSpec& spec, const Vector& x1, const TimeGrid& grid, std::size_t n_paths,
                             std::uint64_t seed, const SimulationOptions& options) {
    return switched_ensemble(spec.field1(), spec.field2(), spec.t0(), x1, bridge_grid(spec, grid), n_paths, seed,
                             options);
}

// ------------------------------------------------------- exponential moments

bool SemimartingaleWitness::satisfies_r_star() const { return k * (1.0 - k1 * t0) >= k1 * (1.0 + lambda / 2.0); }

void SemimartingaleWitness::validate() const {
    if (!(k1 > 0.0 && lambda > 0.0 && k > 0.0)) throw InvalidArgument("witness needs k1, lambda, k > 0");
    if (!(xi0 >= 0.0)) throw InvalidArgument("witness needs xi_0 >= 0");
    if (!(t0 > 0.0 && t0 < std::min(horizon, 1.0 / k1))) throw InvalidArgument("witness needs t0 in (0, min(T, 1/k1))");
    if (!compensator) throw InvalidArgument("witness needs a compensator A_t");
    if (std::abs(compensator(0.0)) > 1e-15) throw InvalidArgument("compensator must start at A_0 = 0");
    if (!satisfies_r_star())
        throw InvalidArgument("condition k (1 - k1 t0) >= k1 (1 + lambda/2) fails for k=" + fmt(k) + ", k1=" + fmt(k1) +
                              ", t0=" + fmt(t0) + ", lambda=" + fmt(lambda));
}

ExperimentReport exp_moment_certificate(const SemimartingaleWitness& witness, const PathEnsemble& xi_paths) {
    witness.validate();
    if (xi_paths.dim() != 1) throw DimensionMismatch("xi paths must be one-dimensional");
    const auto node = xi_paths.grid.index_of(witness.t0);
    if (!node) throw InvalidArgument("t0 is not a node of the xi grid");
    const auto& t = xi_paths.grid.nodes();
    for (std::size_t i = 0; i < *node; ++i)
        if (witness.compensator(t[i + 1]) < witness.compensator(t[i]))
            throw InvalidArgument("compensator must be nondecreasing");
    const Empirical slice = xi_paths.slice(*node);
    if ((slice.points().array() < 0.0).any()) throw InvalidArgument("xi must be nonnegative");
    const double scale = witness.lambda / (1.0 + witness.k * witness.t0);
    const Vector values = (scale * slice.points().row(0).transpose()).array().exp().matrix();
    const double n = static_cast<double>(values.size());
    const double mean = values.mean();
    const double var = n > 1 ? (values.array() - mean).square().sum() / (n - 1.0) : 0.0;
    const double se = std::sqrt(var / n);
    const double bound = std::exp(witness.lambda * witness.xi0 + witness.lambda * witness.compensator(witness.t0));
    auto report = make_report("exp_moment", mean, bound, 3.0 * se);
    report.params = {{"k1", witness.k1},     {"lambda", witness.lambda}, {"k", witness.k},
                     {"t0", witness.t0},     {"xi0", witness.xi0},       {"A_t0", witness.compensator(witness.t0)},
                     {"paths", values.size()}, {"standard_error", se}};
    report.seed = xi_paths.seed;
    return report;
}

PathEnsemble brownian_squared_norm(Eigen::Index d, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                   const SimulationOptions& options) {
    const CoefficientField bm = make_field(d, {}, {}, 0.5 * Matrix::Identity(d, d), "brownian");
    PathEnsemble b = simulate_ensemble(bm, Vector::Zero(d), grid, n_paths, seed, options);
    PathEnsemble xi;
    xi.grid = b.grid;
    xi.seed = seed;
    xi.aborted = b.aborted;
    xi.paths.reserve(n_paths);
    for (const auto& p : b.paths) xi.paths.emplace_back(p.colwise().squaredNorm());
    return xi;
}

} // namespace bicouple
