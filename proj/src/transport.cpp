#include "bicouple/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bicouple {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Eigen::Index> sorted_order(const Empirical& m) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return m.point(a)(0) < m.point(b)(0); });
    return idx;
}

void check_same_dim(const Empirical& mu, const Empirical& nu) {
    if (mu.dim() != nu.dim()) throw DimensionMismatch("transport between measures of different dimension");
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

struct SinkhornState {
    Vector f, g;
    int iterations = 0;
};

// Log-domain Sinkhorn; plan_ij = a_i b_j exp((f_i + g_j - C_ij)/eps).
SinkhornState sinkhorn(const Matrix& cost, const Vector& a, const Vector& b, const OtOptions& opt) {
    const Eigen::Index n = cost.rows(), m = cost.cols();
    const Vector log_a = a.array().log().matrix();
    const Vector log_b = b.array().log().matrix();
    const double eps = opt.epsilon;
    SinkhornState s{Vector::Zero(n), Vector::Zero(m), 0};
    Vector work_row(m), work_col(n);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            work_row = (s.g - cost.row(i).transpose()) / eps + log_b;
            s.f(i) = -eps * log_sum_exp(work_row);
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            work_col = (s.f - cost.col(j)) / eps + log_a;
            s.g(j) = -eps * log_sum_exp(work_col);
        }
        // Columns are exact after the g-update; measure the row violation.
        double violation = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            work_row = (s.g - cost.row(i).transpose()).array() / eps + s.f(i) / eps;
            const double row_mass = a(i) * (work_row.array().exp() * b.array()).sum();
            violation = std::max(violation, std::abs(row_mass - a(i)));
        }
        s.iterations = it;
        if (violation < opt.tolerance) return s;
    }
    throw ConvergenceError("Sinkhorn did not reach the marginal tolerance within " +
                           std::to_string(opt.max_iterations) +
                           " iterations; increase epsilon or switch to the exact solver");
}

Matrix sinkhorn_plan(const Matrix& cost, const Vector& a, const Vector& b, const SinkhornState& s, double eps) {
    Matrix plan(cost.rows(), cost.cols());
    for (Eigen::Index j = 0; j < cost.cols(); ++j)
        for (Eigen::Index i = 0; i < cost.rows(); ++i)
            plan(i, j) = a(i) * b(j) * std::exp((s.f(i) + s.g(j) - cost(i, j)) / eps);
    return plan;
}

// OT_eps(mu, mu) through the symmetric potential f = g; the averaged update
// f <- (f + T f) / 2 avoids the period-two oscillation of plain Sinkhorn.
double symmetric_entropic_value(const Matrix& cost, const Vector& a, const OtOptions& opt) {
    const Eigen::Index n = cost.rows();
    const Vector log_a = a.array().log().matrix();
    const double eps = opt.epsilon;
    Vector f = Vector::Zero(n), next(n), work(n);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            work = (f - cost.col(i)) / eps + log_a;
            next(i) = -eps * log_sum_exp(work);
        }
        const double change = (next - f).cwiseAbs().maxCoeff();
        f = 0.5 * (f + next);
        if (change < opt.tolerance * eps) return 2.0 * a.dot(f);
    }
    throw ConvergenceError("symmetric Sinkhorn did not converge within " + std::to_string(opt.max_iterations) +
                           " iterations; increase epsilon");
}

} // namespace

double w2_empirical_1d(const Empirical& mu, const Empirical& nu) {
    if (mu.dim() != 1 || nu.dim() != 1) throw DimensionMismatch("w2_empirical_1d needs 1-D measures");
    const auto ia = sorted_order(mu);
    const auto ib = sorted_order(nu);
    std::size_t p = 0, q = 0;
    double ra = mu.weight(ia[0]), rb = nu.weight(ib[0]);
    double total = 0.0;
    // March through both quantile functions, pairing equal mass slices.
    while (p < ia.size() && q < ib.size()) {
        const bool next_a = ra <= rb;
        const bool next_b = rb <= ra;
        const double take = next_a ? ra : rb;
        const double diff = mu.point(ia[p])(0) - nu.point(ib[q])(0);
        total += take * diff * diff;
        if (next_a) {
            if (++p < ia.size()) ra = mu.weight(ia[p]);
        } else {
            ra -= take;
        }
        if (next_b) {
            if (++q < ib.size()) rb = nu.weight(ib[q]);
        } else {
            rb -= take;
        }
    }
    return std::sqrt(std::max(total, 0.0));
}

Matrix squared_distance_matrix(const Empirical& mu, const Empirical& nu) {
    check_same_dim(mu, nu);
    Matrix c(mu.size(), nu.size());
    for (Eigen::Index j = 0; j < c.cols(); ++j)
        for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, j) = (mu.point(i) - nu.point(j)).squaredNorm();
    return c;
}

double CouplingPlan::recompute_cost(const Empirical& mu, const Empirical& nu) const {
    double total = 0.0;
    for (Eigen::Index j = 0; j < mass.cols(); ++j)
        for (Eigen::Index i = 0; i < mass.rows(); ++i)
            if (mass(i, j) != 0.0) total += mass(i, j) * (mu.point(i) - nu.point(j)).squaredNorm();
    return total;
}

double CouplingPlan::marginal_violation(const Empirical& mu, const Empirical& nu) const {
    if (mass.rows() != mu.size() || mass.cols() != nu.size())
        throw DimensionMismatch("plan shape does not match the measures");
    const double rows_dev = (mass.rowwise().sum() - mu.weights()).cwiseAbs().maxCoeff();
    const double cols_dev = (mass.colwise().sum().transpose() - nu.weights()).cwiseAbs().maxCoeff();
    return std::max(rows_dev, cols_dev);
}

nlohmann::json to_json(const CouplingPlan& plan) {
    nlohmann::json triplets = nlohmann::json::array();
    for (Eigen::Index i = 0; i < plan.mass.rows(); ++i)
        for (Eigen::Index j = 0; j < plan.mass.cols(); ++j)
            if (plan.mass(i, j) != 0.0) triplets.push_back({i, j, plan.mass(i, j)});
    return {{"cost", plan.cost}, {"rows", plan.rows()}, {"cols", plan.cols()}, {"triplets", std::move(triplets)}};
}

std::vector<Eigen::Index> solve_assignment(const Matrix& cost) {
    // Shortest augmenting path Hungarian method with row/column potentials.
    const Eigen::Index n = cost.rows();
    if (cost.cols() != n) throw DimensionMismatch("assignment needs a square cost matrix");
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (Eigen::Index i = 1; i <= n; ++i) {
        match[0] = i;
        Eigen::Index j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const Eigen::Index i0 = match[j0];
            double delta = kInf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const Eigen::Index j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Eigen::Index> result(static_cast<std::size_t>(n));
    for (Eigen::Index j = 1; j <= n; ++j) result[static_cast<std::size_t>(match[j] - 1)] = j - 1;
    return result;
}

Matrix solve_transportation(const Matrix& cost, const Vector& a, const Vector& b) {
    const Eigen::Index n = cost.rows(), m = cost.cols();
    if (a.size() != n || b.size() != m) throw DimensionMismatch("transportation: weights do not match cost shape");
    constexpr double dust = 1e-15;
    Matrix flow = Matrix::Zero(n, m);
    Vector supply = a, demand = b;
    // Node potentials: sources 0..n-1, sinks n..n+m-1.
    std::vector<double> pot(static_cast<std::size_t>(n + m), 0.0), dist(static_cast<std::size_t>(n + m));
    std::vector<Eigen::Index> pred(static_cast<std::size_t>(n + m));
    std::vector<char> done(static_cast<std::size_t>(n + m));

    auto remaining = [&] { return std::min(supply.sum(), demand.sum()); };
    std::size_t guard = 0;
    const std::size_t guard_limit = static_cast<std::size_t>(4 * (n + m) * (n + m) + 16);
    while (remaining() > 1e-13) {
        if (++guard > guard_limit) throw ConvergenceError("transportation solver failed to terminate");
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(done.begin(), done.end(), 0);
        std::fill(pred.begin(), pred.end(), -1);
        for (Eigen::Index i = 0; i < n; ++i)
            if (supply(i) > dust) dist[i] = 0.0;
        Eigen::Index target = -1;
        // Dense Dijkstra on reduced costs; stops at the first sink with demand.
        for (;;) {
            Eigen::Index u = -1;
            double best = kInf;
            for (Eigen::Index k = 0; k < n + m; ++k)
                if (!done[k] && dist[k] < best) {
                    best = dist[k];
                    u = k;
                }
            if (u < 0) break;
            done[u] = 1;
            if (u >= n && demand(u - n) > dust) {
                target = u;
                break;
            }
            if (u < n) {
                for (Eigen::Index j = 0; j < m; ++j) {
                    const Eigen::Index w = n + j;
                    if (done[w]) continue;
                    const double rc = std::max(0.0, cost(u, j) + pot[u] - pot[w]);
                    if (dist[u] + rc < dist[w]) {
                        dist[w] = dist[u] + rc;
                        pred[w] = u;
                    }
                }
            } else {
                const Eigen::Index j = u - n;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (done[i] || flow(i, j) <= dust) continue;
                    const double rc = std::max(0.0, -cost(i, j) + pot[u] - pot[i]);
                    if (dist[u] + rc < dist[i]) {
                        dist[i] = dist[u] + rc;
                        pred[i] = u;
                    }
                }
            }
        }
        if (target < 0) break;
        const double dt = dist[target];
        for (Eigen::Index k = 0; k < n + m; ++k) pot[k] += std::min(dist[k], dt);

        double amount = demand(target - n);
        Eigen::Index node = target;
        while (pred[node] >= 0) {
            const Eigen::Index from = pred[node];
            if (from >= n) amount = std::min(amount, flow(node, from - n));  // backward arc sink->source
            node = from;
        }
        amount = std::min(amount, supply(node));
        const Eigen::Index source = node;
        node = target;
        while (pred[node] >= 0) {
            const Eigen::Index from = pred[node];
            if (from < n) {
                flow(from, node - n) += amount;
            } else {
                flow(node, from - n) -= amount;
                if (flow(node, from - n) < dust) flow(node, from - n) = 0.0;
            }
            node = from;
        }
        supply(source) -= amount;
        demand(target - n) -= amount;
    }
    return flow;
}

CouplingPlan optimal_coupling_discrete(const Empirical& mu, const Empirical& nu) {
    return w2_empirical_ot(mu, nu).plan;
}

OtResult w2_empirical_ot(const Empirical& mu, const Empirical& nu, const OtOptions& options) {
    check_same_dim(mu, nu);
    const Eigen::Index n = mu.size(), m = nu.size();
    OtResult result;
    if (options.method == OtMethod::exact &&
        static_cast<std::size_t>(n) * static_cast<std::size_t>(m) > options.max_entries)
        throw CapacityError("exact transport limited to " + std::to_string(options.max_entries) +
                            " cost entries; use the entropic method for larger problems");
    const Matrix cost = squared_distance_matrix(mu, nu);
    if (options.method == OtMethod::exact) {
        if (n == m && mu.is_uniform() && nu.is_uniform()) {
            const auto match = solve_assignment(cost);
            result.plan.mass = Matrix::Zero(n, m);
            for (Eigen::Index i = 0; i < n; ++i) result.plan.mass(i, match[static_cast<std::size_t>(i)]) = 1.0 / static_cast<double>(n);
        } else {
            result.plan.mass = solve_transportation(cost, mu.weights(), nu.weights());
        }
    } else {
        if (!(options.epsilon > 0.0)) throw InvalidArgument("entropic transport needs epsilon > 0");
        const auto state = sinkhorn(cost, mu.weights(), nu.weights(), options);
        result.iterations = state.iterations;
        result.plan.mass = sinkhorn_plan(cost, mu.weights(), nu.weights(), state, options.epsilon);
        if (options.debias) {
            const double cross = mu.weights().dot(state.f) + nu.weights().dot(state.g);
            const double self_mu = symmetric_entropic_value(squared_distance_matrix(mu, mu), mu.weights(), options);
            const double self_nu = symmetric_entropic_value(squared_distance_matrix(nu, nu), nu.weights(), options);
            result.debiased_cost = cross - 0.5 * (self_mu + self_nu);
        }
    }
    result.plan.cost = result.plan.mass.cwiseProduct(cost).sum();
    result.raw_cost = result.plan.cost;
    result.distance = std::sqrt(std::max(result.plan.cost, 0.0));
    return result;
}

} // namespace bicouple
