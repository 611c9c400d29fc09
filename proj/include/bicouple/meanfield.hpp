#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dynamics.hpp"
#include "measures.hpp"
#include "report.hpp"

namespace bicouple {

/// A law given either in closed form or by atoms.
using Law = std::variant<Gaussian, Empirical>;

Eigen::Index law_dim(const Law& law);

/// n points representing the law: Gaussian draws, the atoms themselves when
/// there are exactly n of them, otherwise a weighted resample.
Empirical law_cloud(const Law& law, std::size_t n, std::uint64_t seed);

using MeasureVectorField = std::function<Vector(double, const Vector&, const Empirical&)>;
using MeasureMatrixField = std::function<Matrix(double, const Vector&, const Empirical&)>;

/// Distribution-dependent coefficients b(t, x, mu), a(t, x, mu), sigma with
/// sigma sigma' = 2a. K bounds the W2-Lipschitz gaps of b, a and div a.
struct MVCoefficientField {
    Eigen::Index dim = 1;
    std::string name;
    MeasureVectorField drift;
    MeasureMatrixField diffusion;
    MeasureMatrixField sigma;              ///< optional; defaults to the symmetric root of 2a
    std::optional<Matrix> constant_sigma;  ///< when a does not depend on (t, x, mu)
    bool distribution_free = false;        ///< coefficients ignore mu
    double K = 1.0;
    DiniModulus modulus = DiniModulus::power(1.0);

    Matrix sigma_at(double t, const Vector& x, const Empirical& mu) const;
    /// Central differences of a(t, ., mu) with the given step.
    Vector divergence(double t, const Vector& x, const Empirical& mu, double step = 1e-4) const;

    /// Lifts a field that ignores the law.
    static MVCoefficientField from_field(const CoefficientField& field);
};

/// b = theta (mean(mu) - x) + b0(x), a = sigma^2/2 (1 + kappa / (1 + |x - mean(mu)|^2)) I,
/// with the bounded Dini part b0_k(x) = -strength sign(x_k) min(1, |x_k|^alpha).
MVCoefficientField mean_field_ou(Eigen::Index dim, double theta, double sigma, double kappa = 0.0,
                                 double dini_strength = 0.0, double alpha = 0.5);

struct MVFieldCheck {
    bool ok = true;
    std::vector<std::string> problems;
    double drift_ratio = 0.0;       ///< max |b^nu - b^mu| / W2(nu, mu)
    double diffusion_ratio = 0.0;   ///< max ||a^nu - a^mu|| / W2(nu, mu)
    double divergence_ratio = 0.0;  ///< max |div(a^nu - a^mu)| / W2(nu, mu)
};

/// Sampled check of the W2-Lipschitz bounds on random pairs of small
/// empirical measures; only finitely many laws are examined.
MVFieldCheck check_mv_field(const MVCoefficientField& field, double horizon, int pairs = 64, std::uint64_t seed = 1,
                            double radius = 2.0);

struct LipschitzEstimate {
    double space = 0.0;  ///< sup |b(x, mu) - b(y, mu)| / |x - y|
    double law = 0.0;    ///< sup |b(x, mu) - b(x, nu)| / W2(mu, nu)
    double total() const { return space + law; }
};

LipschitzEstimate estimate_lipschitz(const MVCoefficientField& field, double horizon, int samples = 64,
                                     std::uint64_t seed = 1, double radius = 2.0);

struct ParticleOptions {
    unsigned threads = 0;
    /// Noise stream of each particle; defaults to its index.
    std::vector<std::uint64_t> streams;
};

/// Particle system started from the columns of `start`; each step feeds the
/// current empirical measure (atoms in lexicographic order) to the
/// coefficients. Throws BlowUpError on a non-finite particle.
PathEnsemble evolve_cloud(const MVCoefficientField& field, const Matrix& start, const TimeGrid& grid,
                          std::uint64_t seed, const ParticleOptions& options = {});

/// N particles drawn from init with independent noises.
PathEnsemble evolve_particles(const MVCoefficientField& field, const Law& init, std::size_t n, const TimeGrid& grid,
                              std::uint64_t seed, const ParticleOptions& options = {});

/// Particle approximation of P_t^* mu0 on the grid nodes up to t.
Empirical flow_map(const MVCoefficientField& field, const Law& mu0, double t, std::size_t n, const TimeGrid& grid,
                   std::uint64_t seed, const ParticleOptions& options = {});

/// W2 between two clouds: sorting in 1-D, the exact solver otherwise.
double cloud_w2(const Empirical& a, const Empirical& b);

struct StabilityOptions {
    std::optional<double> bound;  ///< fixed Lipschitz bound c; default exp(k T) from measured constants
    double slack_factor = 1.0;    ///< multiplies the default bound
    int report_points = 10;       ///< number of evaluation times (grid nodes, evenly spread)
    unsigned threads = 0;
};

/// Synchronously coupled particle clouds from an optimal pairing of nu1 and
/// nu2 samples; left = sup_t W2(P_t nu1, P_t nu2) / W2(nu1, nu2), right = c.
ExperimentReport w2_stability_experiment(const MVCoefficientField& field, const Law& nu1, const Law& nu2,
                                         const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                                         const StabilityOptions& options = {});

} // namespace bicouple
