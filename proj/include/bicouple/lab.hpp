#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meanfield.hpp"
#include "oracles.hpp"
#include "report.hpp"

namespace bicouple {

// ------------------------------------------------------------------ Talagrand

struct TalagrandOptions {
    int k = 5;                  ///< k-NN order for sampled laws
    std::uint64_t seed = 1;     ///< reference N(0, I) sample
    double tolerance = 0.05;    ///< estimator slack for sampled laws
    std::size_t max_atoms = 2000;  ///< sampled laws are thinned to this many atoms for exact OT
    unsigned threads = 0;
};

/// W2(nu, N(0, I))^2 <= 2 Ent(nu | N(0, I)); closed forms for Gaussian nu,
/// k-NN and exact OT against a reference sample otherwise.
ExperimentReport talagrand_experiment(const Law& nu, const TalagrandOptions& options = {});

// --------------------------------------------------------------- entropy cost

struct EntropyCostOptions {
    /// When set, compares Ent with K |x1 - x2|^2 / (2 (e^{2Kt} - 1)) (1/(4t) |x1 - x2|^2 at K = 0).
    std::optional<double> curvature;
    /// Rate check: sup_t t Ent_t <= rate_factor * (t Ent_t at the largest t).
    double rate_factor = 10.0;
};

/// K / (2 (e^{2Kt} - 1)), with the limit 1/(4t) at K = 0.
double entropy_cost_coefficient(double curvature, double t);

/// Ent(P_t^{1,x1} | P_t^{2,x2}) over the grid from the closed-form laws.
ExperimentReport entropy_cost_experiment(const LinearSDESpec& spec1, const LinearSDESpec& spec2, const Vector& x1,
                                         const Vector& x2, const std::vector<double>& t_grid,
                                         const EntropyCostOptions& options = {});

// -------------------------------------------------------------- BOG

struct BogPair {
    std::string label;
    LinearSDESpec spec1, spec2;  ///< both started from spec1's initial law
};

/// BOG bound versus the true entropy for each pair. Verdict is violated when
/// a finite bound fails, divergent when some pair raises the divergence flag.
ExperimentReport bog_singularity_experiment(const std::vector<BogPair>& pairs, double t, const BogOptions& options = {});

// ---------------------------------------------------------------- bi-coupling

struct BicouplingTerms {
    double lhs = 0.0;                ///< Ent(P1 | P2)
    double first_term = 0.0;         ///< p Ent(P1 | Pb)
    ExtendedReal log_moment;         ///< log int (dPb/dP2)^{p/(p-1)} dP2
    ExtendedReal rhs;
};

/// Closed-form sides with P1 = P_{t1}^{1,x1}, Pb the law of the switched
/// process (spec1 up to t0, spec2 after) from x1, P2 = P_{t1}^{2,x2}.
BicouplingTerms bicoupling_terms(const LinearSDESpec& spec1, const LinearSDESpec& spec2, const Vector& x1,
                                 const Vector& x2, double t1, double t0, double p);

struct BicouplingOptions {
    std::vector<double> epsilon_sweep{1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2};
    int shrink_levels = 6;  ///< t1 2^{-j}, j = 0..levels, for the t1 * first-term record
};

ExperimentReport bicoupling_experiment(const LinearSDESpec& spec1, const LinearSDESpec& spec2, const Vector& x1,
                                       const Vector& x2, double t1, double epsilon = 0.5, double p = 2.0,
                                       const BicouplingOptions& options = {});

// ---------------------------------------------------------------- log-Harnack

/// Positive test function bounded below.
struct TestFunction {
    enum class Kind { constant, exponential, gaussian_bump, smoothed_indicator };
    Kind kind = Kind::constant;
    double level = 1.0;    ///< constant value, or bump/indicator height
    double floor = 0.0;    ///< lower bound added to bump/indicator; must be > 0
    Vector direction;      ///< exponential: f = exp(<v, x>)
    Vector centre;
    double width = 1.0;    ///< bump width or indicator radius
    double sharpness = 10.0;  ///< indicator logistic slope

    double operator()(const Vector& x) const;
    std::string describe() const;
    /// Throws InvalidArgument unless f is uniformly positive.
    void validate(Eigen::Index dim) const;

    static TestFunction constant_fn(double c);
    static TestFunction exponential(Vector v);
    static TestFunction bump(Vector centre, double width, double height, double floor);
    static TestFunction indicator(Vector centre, double radius, double height, double floor, double sharpness = 10.0);
};

/// Gaussian semigroup with curvature K: P_t f(x) = E f(e^{-Kt} x + sqrt((1 - e^{-2Kt})/K) Z), heat at K = 0.
Gaussian semigroup_law(double curvature, double t, const Vector& x);

/// P_t log f(x) <= log P_t f(y) + coefficient(K, t) |x - y|^2 for each f.
ExperimentReport log_harnack_experiment(double curvature, double t, const Vector& x, const Vector& y,
                                        const std::vector<TestFunction>& family, int quadrature_nodes = 24);

// --------------------------------------------------- mean-field entropy cost

struct MvEntropyOptions {
    int k = 5;
    int batches = 4;           ///< batch split for the estimator's standard error
    double rate_factor = 10.0;
    unsigned threads = 0;
};

/// k-NN entropy between particle approximations of P_t^* nu1 and P_t^* nu2
/// at the report times; c_t = t Ent_t / W2(nu1, nu2)^2 must stay bounded.
ExperimentReport mv_entropy_cost_experiment(const MVCoefficientField& field, const Law& nu1, const Law& nu2,
                                            const TimeGrid& grid, const std::vector<double>& report_times,
                                            std::size_t n, std::uint64_t seed, const MvEntropyOptions& options = {});

/// W2 between two laws: closed form for two Gaussians, exact OT on atoms or samples otherwise.
double law_w2(const Law& a, const Law& b, std::size_t samples = 1000, std::uint64_t seed = 1);

} // namespace bicouple
