#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "measures.hpp"
#include "report.hpp"
#include "rng.hpp"

namespace bicouple {

using VectorField = std::function<Vector(double, const Vector&)>;
using MatrixField = std::function<Matrix(double, const Vector&)>;

/// Modulus of continuity phi in the Dini class: increasing, concave,
/// phi(0) = 0 and int_0^1 phi(s)/s ds < inf.
class DiniModulus {
public:
    DiniModulus(std::function<double(double)> phi, std::string tag);

    /// r -> r^alpha, alpha in (0, 1]
    static DiniModulus power(double alpha);
    /// r -> (1 + log(1 + 1/r))^{-gamma}; Dini for gamma > 1.
    static DiniModulus log_type(double gamma);

    double operator()(double r) const { return phi_(r); }
    const std::string& tag() const { return tag_; }

    struct Check {
        bool ok = true;
        std::vector<std::string> problems;
        double integral = 0.0;  ///< int_0^1 phi(s)/s ds when it converged
    };

    /// phi(0) = 0, monotone and midpoint-concave on 64 nodes of [0, 2], and
    /// convergence of int_0^1 phi(s)/s ds.
    Check check() const;

private:
    std::function<double(double)> phi_;
    std::string tag_;
};

/// Time-dependent diffusion coefficients: drift b = b0 + b1 with b0 bounded
/// (Dini part) and b1 Lipschitz, diffusion matrix a SPD, sigma with
/// sigma sigma' = 2a. Generator tr(a Hess) + b.grad.
struct CoefficientField {
    Eigen::Index dim = 1;
    std::string name;
    VectorField drift_dini;       ///< b0; empty means zero
    VectorField drift_lipschitz;  ///< b1; empty means zero
    MatrixField diffusion;        ///< a
    MatrixField sigma;            ///< optional; defaults to the symmetric root of 2a
    VectorField diffusion_divergence;  ///< optional analytic div a
    std::optional<Matrix> constant_sigma;  ///< cached sigma when a is constant in (t, x)
    double K = 1.0;
    DiniModulus modulus = DiniModulus::power(1.0);

    Vector drift(double t, const Vector& x) const;
    Matrix diffusion_at(double t, const Vector& x) const { return diffusion(t, x); }
    Matrix sigma_at(double t, const Vector& x) const;
    /// (sum_l d_l a^{kl})_k, analytic when provided else central differences.
    Vector divergence(double t, const Vector& x, double step = 1e-4) const;
};

/// Field with a = a_const, sigma = sqrt(2 a_const), given drift parts. K starts
/// at max(1, ||a||, ||a^-1||); raise it when the drift needs more.
CoefficientField make_field(Eigen::Index dim, VectorField b0, VectorField b1, const Matrix& a_const, std::string name = {});

struct FieldCheck {
    bool ok = true;
    std::vector<std::string> problems;
    double max_b0 = 0.0;
    double max_a_norm = 0.0;
    double max_a_inv_norm = 0.0;
    double lip_b1 = 0.0;
    double lip_a = 0.0;
    double max_sigma_error = 0.0;
};

/// Randomised check of the field's regularity constants on [0,T] x B(0, radius).
FieldCheck check_field(const CoefficientField& field, double horizon, int samples = 256, std::uint64_t seed = 1,
                       double radius = 3.0);

/// Strictly increasing time nodes starting at 0.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> nodes);
    static TimeGrid uniform(double horizon, std::size_t steps);

    const std::vector<double>& nodes() const { return nodes_; }
    std::size_t steps() const { return nodes_.size() - 1; }
    double horizon() const { return nodes_.back(); }
    double max_step() const;
    /// Index of a node equal to t, if any.
    std::optional<std::size_t> index_of(double t) const;
    /// Grid with t inserted exactly. An interior node within 1e-12 T of t is
    /// moved onto t; throws when t is outside [0, T] or that close to an endpoint.
    TimeGrid refined_with(double t) const;
    /// Nodes up to t with t itself appended when it is not already a node.
    TimeGrid truncated(double t) const;

private:
    std::vector<double> nodes_;
};

enum class NoiseMode { shared, independent };

/// Discretised trajectories on a common grid. Each path is a d x (steps+1)
/// matrix. Paths hit by a non-finite state are listed in `aborted` and
/// excluded from slices.
struct PathEnsemble {
    TimeGrid grid = TimeGrid::uniform(1.0, 1);
    std::vector<Matrix> paths;
    NoiseMode noise = NoiseMode::independent;
    std::uint64_t seed = 0;
    std::vector<std::size_t> aborted;
    /// sigma dW per step and path, when recording was requested.
    std::vector<Matrix> increments;

    bool flagged() const { return !aborted.empty(); }
    Eigen::Index dim() const { return paths.empty() ? 0 : paths.front().rows(); }
    Empirical slice(std::size_t node) const;
    Empirical terminal() const { return slice(grid.steps()); }
    /// path,t,x1..xd rows.
    void write_csv(std::ostream& os) const;
};

struct SimulationOptions {
    unsigned threads = 0;           ///< 0 = hardware concurrency
    bool record_increments = false;
    bool antithetic = false;        ///< odd paths reuse the negated noise of the preceding even path
};

namespace detail {

/// One Euler-Maruyama update x <- x + b h + sigma dW. Shared by every
/// integrator so matched inputs give bit-identical states.
inline void em_update(Vector& x, const Vector& drift, const Matrix& sigma, const Vector& dw, double h) {
    const Vector noise = sigma * dw;
    x = x + drift * h + noise;
}

/// Brownian increments keyed by (seed, stream); with `negate` the stream is
/// mirrored, which gives antithetic pairs.
class BrownianIncrements {
public:
    BrownianIncrements(std::uint64_t seed, std::uint64_t stream, bool negate = false)
        : rng_(seed, stream), negate_(negate) {}

    void draw(Vector& dw, double h) {
        const double scale = std::sqrt(h);
        for (Eigen::Index i = 0; i < dw.size(); ++i) {
            const double z = normal_(rng_);
            dw(i) = negate_ ? -scale * z : scale * z;
        }
    }

private:
    StreamRng rng_;
    std::normal_distribution<double> normal_;
    bool negate_;
};

} // namespace detail

/// Single Euler-Maruyama path; the Brownian stream is keyed by (seed, stream).
/// Throws BlowUpError (suggesting half the largest step) on a non-finite state.
PathEnsemble euler_maruyama(const CoefficientField& field, const Vector& x0, const TimeGrid& grid, std::uint64_t seed,
                            std::uint64_t stream = 0);

/// n independent paths from x0, path p on stream p. Blow-ups flag the ensemble.
PathEnsemble simulate_ensemble(const CoefficientField& field, const Vector& x0, const TimeGrid& grid,
                               std::size_t n_paths, std::uint64_t seed, const SimulationOptions& options = {});

/// Two SDEs driven by one Brownian path: path 0 from x1 under field1, path 1
/// from x2 under field2.
PathEnsemble synchronous_pair(const CoefficientField& field1, const CoefficientField& field2, const Vector& x1,
                              const Vector& x2, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream = 0,
                              bool record_increments = false);

/// n synchronously coupled pairs; first holds the field1 paths, second the field2 paths.
std::pair<PathEnsemble, PathEnsemble> synchronous_pairs(const CoefficientField& field1, const CoefficientField& field2,
                                                        const Vector& x1, const Vector& x2, const TimeGrid& grid,
                                                        std::size_t n_pairs, std::uint64_t seed,
                                                        const SimulationOptions& options = {});

/// Switch data for the interpolating diffusion: generator of field1 on
/// [0, t0], of field2 on (t0, t1], with t0 = epsilon t1 and epsilon in (0, 1/2].
class BridgeSpec {
public:
    BridgeSpec(CoefficientField field1, CoefficientField field2, double t1, double epsilon, double horizon);

    const CoefficientField& field1() const { return field1_; }
    const CoefficientField& field2() const { return field2_; }
    double t1() const { return t1_; }
    double epsilon() const { return epsilon_; }
    double t0() const { return epsilon_ * t1_; }

private:
    CoefficientField field1_, field2_;
    double t1_, epsilon_;
};

/// Path of the switched SDE: the step (t_k, t_{k+1}] uses field1 when
/// t_{k+1} <= t_switch and field2 otherwise. t_switch must be a grid node;
/// t_switch = 0 gives field2 throughout, t_switch = T field1 throughout.
PathEnsemble switched_path(const CoefficientField& field1, const CoefficientField& field2, double t_switch,
                           const Vector& x1, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream = 0);

PathEnsemble switched_ensemble(const CoefficientField& field1, const CoefficientField& field2, double t_switch,
                               const Vector& x1, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                               const SimulationOptions& options = {});

/// Bridge path on [0, t1]: grid refined to contain t0 exactly and cut at t1.
PathEnsemble bridge_path(const BridgeSpec& spec, const Vector& x1, const TimeGrid& grid, std::uint64_t seed,
                         std::uint64_t stream = 0);

PathEnsemble bridge_ensemble(const BridgeSpec& spec, const Vector& x1, const TimeGrid& grid, std::size_t n_paths,
                             std::uint64_t seed, const SimulationOptions& options = {});

/// Nonnegative continuous semimartingale with d xi <= k1 xi dt + dA + dM,
/// d<M> <= k1 xi dt, and the exponent parameters (lambda, k) at time t0.
struct SemimartingaleWitness {
    double xi0 = 0.0;
    double k1 = 1.0;
    std::function<double(double)> compensator = [](double) { return 0.0; };  ///< A_t, nondecreasing, A_0 = 0
    double lambda = 1.0;
    double k = 1.0;
    double t0 = 0.1;
    double horizon = 1.0;

    /// k (1 - k1 t0) >= k1 (1 + lambda / 2)
    bool satisfies_r_star() const;
    /// Throws InvalidArgument unless every parameter condition holds.
    void validate() const;
};

/// Monte Carlo check of E exp[lambda xi_{t0} / (1 + k t0)] <= exp[lambda xi_0 + lambda A_{t0}]
/// with a 3-standard-error tolerance. xi_paths must be 1-D and contain t0 as a node.
ExperimentReport exp_moment_certificate(const SemimartingaleWitness& witness, const PathEnsemble& xi_paths);

/// xi_t = |B_t|^2 for a d-dimensional standard Brownian motion B (variance t).
PathEnsemble brownian_squared_norm(Eigen::Index d, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                   const SimulationOptions& options = {});

} // namespace bicouple
