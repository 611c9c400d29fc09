#include "bicouple/cli/registry.hpp"

#include <cmath>

#include "bicouple/cli/catalog.hpp"
#include "bicouple/divergence.hpp"
#include "bicouple/lab.hpp"

namespace bicouple::cli {

namespace {

using nlohmann::json;

ParamSpec real(std::string name, json def, std::string desc, std::optional<double> min = {},
               std::optional<double> exclusive_min = {}, std::optional<double> max = {}) {
    return {std::move(name), "real", std::move(def), std::move(desc), min, exclusive_min, max};
}

ParamSpec integer(std::string name, json def, std::string desc, std::optional<double> min = {}) {
    return {std::move(name), "integer", std::move(def), std::move(desc), min, {}, {}};
}

ParamSpec typed(std::string name, std::string type, json def, std::string desc) {
    return {std::move(name), std::move(type), std::move(def), std::move(desc), {}, {}, {}};
}

Vector vec(const json& p, const char* key) { return to_vector(p.at(key), key); }

std::vector<double> reals(const json& p, const char* key) { return p.at(key).get<std::vector<double>>(); }

TestFunction test_function(const json& f, Eigen::Index dim) {
    if (!f.is_object() || !f.contains("kind")) throw InvalidArgument("test function needs a 'kind'");
    const std::string kind = f["kind"];
    const auto num = [&f](const char* key, double def) { return f.contains(key) ? f[key].get<double>() : def; };
    const auto centre = [&] { return f.contains("centre") ? to_vector(f["centre"], "centre") : Vector(Vector::Zero(dim)); };
    if (kind == "constant") return TestFunction::constant_fn(num("level", 1.0));
    if (kind == "exponential") return TestFunction::exponential(to_vector(f.at("direction"), "direction"));
    if (kind == "gaussian_bump")
        return TestFunction::bump(centre(), num("width", 1.0), num("height", 1.0), num("floor", 0.0));
    if (kind == "smoothed_indicator")
        return TestFunction::indicator(centre(), num("radius", 1.0), num("height", 1.0), num("floor", 0.0),
                                       num("sharpness", 10.0));
    throw InvalidArgument("unknown test function kind '" + kind + "'");
}

DiscreteDistribution distribution(const json& p, const char* key) {
    return DiscreteDistribution::from_masses(to_vector(p.at(key), key));
}

TimeGrid uniform_grid(const json& p) {
    return TimeGrid::uniform(p.at("horizon").get<double>(), p.at("steps").get<std::size_t>());
}

ExperimentReport run_talagrand(const json& p, std::uint64_t seed) {
    TalagrandOptions o;
    o.k = p.at("k");
    o.tolerance = p.at("tolerance");
    o.max_atoms = p.at("max_atoms");
    o.seed = seed;
    return talagrand_experiment(law(p.at("nu")), o);
}

ExperimentReport run_entropy_cost(const json& p, std::uint64_t) {
    const Vector x1 = vec(p, "x1"), x2 = vec(p, "x2");
    const std::vector<double> times = reals(p, "times");
    const double horizon = *std::max_element(times.begin(), times.end());
    EntropyCostOptions o;
    if (p.contains("curvature")) o.curvature = p["curvature"].get<double>();
    o.rate_factor = p.at("rate_factor");
    return entropy_cost_experiment(linear_spec(p.at("field1"), x1, horizon), linear_spec(p.at("field2"), x2, horizon),
                                   x1, x2, times, o);
}

ExperimentReport run_bog(const json& p, std::uint64_t seed) {
    const Vector x = vec(p, "x");
    const double t = p.at("t");
    std::vector<BogPair> pairs;
    for (const auto& entry : p.at("pairs")) {
        if (!entry.is_object() || !entry.contains("field1") || !entry.contains("field2"))
            throw InvalidArgument("each BOG pair needs field1 and field2");
        pairs.push_back({entry.value("label", std::string("pair")), linear_spec(entry["field1"], x, t),
                         linear_spec(entry["field2"], x, t)});
    }
    BogOptions o;
    o.n_mc = p.at("n_mc");
    o.nodes = p.at("nodes");
    o.seed = seed;
    auto report = bog_singularity_experiment(pairs, t, o);
    report.seed = seed;
    return report;
}

ExperimentReport run_bicoupling(const json& p, std::uint64_t) {
    const Vector x1 = vec(p, "x1"), x2 = vec(p, "x2");
    const double t1 = p.at("t1");
    return bicoupling_experiment(linear_spec(p.at("field1"), x1, t1), linear_spec(p.at("field2"), x2, t1), x1, x2, t1,
                                 p.at("epsilon"), p.at("p"));
}

ExperimentReport run_log_harnack(const json& p, std::uint64_t) {
    const Vector x = vec(p, "x"), y = vec(p, "y");
    std::vector<TestFunction> family;
    for (const auto& f : p.at("functions")) family.push_back(test_function(f, x.size()));
    return log_harnack_experiment(p.at("curvature"), p.at("t"), x, y, family, p.at("nodes"));
}

ExperimentReport run_mv_entropy_cost(const json& p, std::uint64_t seed) {
    const Law nu1 = law(p.at("nu1")), nu2 = law(p.at("nu2"));
    MvEntropyOptions o;
    o.k = p.at("k");
    o.batches = p.at("batches");
    o.rate_factor = p.at("rate_factor");
    return mv_entropy_cost_experiment(mv_field(p.at("field"), law_dim(nu1)), nu1, nu2, uniform_grid(p),
                                      reals(p, "times"), p.at("particles"), seed, o);
}

ExperimentReport run_w2_stability(const json& p, std::uint64_t seed) {
    const Law nu1 = law(p.at("nu1")), nu2 = law(p.at("nu2"));
    StabilityOptions o;
    if (p.contains("bound")) o.bound = p["bound"].get<double>();
    o.slack_factor = p.at("slack_factor");
    o.report_points = p.at("report_points");
    return w2_stability_experiment(mv_field(p.at("field"), law_dim(nu1)), nu1, nu2, uniform_grid(p),
                                   p.at("particles"), seed, o);
}

ExperimentReport run_exp_moment(const json& p, std::uint64_t seed) {
    const int d = p.at("dim");
    SemimartingaleWitness w;
    w.xi0 = 0.0;
    w.k1 = p.at("k1");
    w.lambda = p.at("lambda");
    w.k = p.at("k");
    w.t0 = p.at("t0");
    w.horizon = p.at("horizon");
    w.compensator = [d](double t) { return d * t; };
    w.validate();
    const TimeGrid grid = TimeGrid::uniform(w.t0, p.at("steps").get<std::size_t>());
    auto report = exp_moment_certificate(w, brownian_squared_norm(d, grid, p.at("paths"), seed));
    report.params["dim"] = d;
    report.notes.emplace_back("witness xi_t = |B_t|^2 with compensator A_t = d t");
    return report;
}

ExperimentReport run_interpolation(const json& p, std::uint64_t) {
    return interpolation_bound_check(distribution(p, "mu1"), distribution(p, "mu2"), distribution(p, "mu"),
                                     p.at("p"));
}

std::vector<Experiment> build() {
    const json heat = "heat";
    const json gauss2 = {{"type", "gaussian"}, {"mean", {1.0, 0.0}}, {"cov", {{1.0, 0.0}, {0.0, 1.0}}}};
    const json bog_pairs = json::array({
        {{"label", "equal-diffusion"}, {"field1", "heat"}, {"field2", {{"type", "drift-gap"}, {"c", 1.0}}}},
        {{"label", "diffusion-gap"}, {"field1", "heat"}, {"field2", {{"type", "diffusion-gap"}, {"a", 2.0}}}},
    });
    const json functions = json::array({
        {{"kind", "constant"}, {"level", 1.0}},
        {{"kind", "exponential"}, {"direction", {0.5}}},
        {{"kind", "gaussian_bump"}, {"centre", {0.0}}, {"width", 1.0}, {"height", 1.0}, {"floor", 0.1}},
        {{"kind", "smoothed_indicator"}, {"centre", {0.0}}, {"radius", 1.0}, {"height", 1.0}, {"floor", 0.1}},
    });
    const json dirac0 = {{"type", "dirac"}, {"x", {0.0}}};
    const json dirac1 = {{"type", "dirac"}, {"x", {1.0}}};

    std::vector<Experiment> list;
    list.push_back({"talagrand",
                    "W2(nu, N(0,I))^2 <= 2 Ent(nu | N(0,I)); closed form for Gaussian nu, k-NN + OT otherwise",
                    {typed("nu", "law", gauss2, "law nu"),
                     integer("k", 5, "k-NN order for sampled laws", 1),
                     real("tolerance", 0.05, "estimator slack for sampled laws", 0.0),
                     integer("max_atoms", 2000, "atoms kept for exact OT", 2)},
                    run_talagrand});
    list.push_back({"entropy_cost",
                    "Ent(P_t^{1,x1} | P_t^{2,x2}) for linear fields: sharp curvature coefficient or the 1/t rate",
                    {typed("field1", "field", heat, "linear catalog field"),
                     typed("field2", "field", heat, "linear catalog field"),
                     typed("x1", "vector", {1.0, 0.0}, "start of the first process"),
                     typed("x2", "vector", {0.0, 0.0}, "start of the second process"),
                     typed("times", "real_list", {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}, "positive evaluation times"),
                     real("curvature", nullptr, "compare with K/(2(e^{2Kt}-1)) |x1-x2|^2; omit for the rate check"),
                     real("rate_factor", 10.0, "rate check allowance", {}, 0.0)},
                    run_entropy_cost});
    list.push_back({"bog_singularity",
                    "BOG entropy bound against the true entropy; a diffusion gap makes the bound diverge",
                    {typed("x", "vector", {0.0}, "common start point"),
                     real("t", 1.0, "time horizon", {}, 0.0),
                     typed("pairs", "list", bog_pairs, "list of {label, field1, field2} with linear fields"),
                     integer("n_mc", 10000, "Monte Carlo draws per pair", 2),
                     integer("nodes", 200, "geometric time nodes", 4)},
                    run_bog});
    list.push_back({"bicoupling",
                    "Entropy decomposition through the switched (bridge) law for linear fields",
                    {typed("field1", "field", heat, "linear catalog field"),
                     typed("field2", "field", {{"type", "diffusion-gap"}, {"a", 2.0}}, "linear catalog field"),
                     typed("x1", "vector", {0.0}, "start of the first process"),
                     typed("x2", "vector", {0.0}, "start of the second process"),
                     real("t1", 1.0, "terminal time", {}, 0.0),
                     real("epsilon", 0.5, "switch fraction t0 / t1", {}, 0.0, 0.5),
                     real("p", 2.0, "Hoelder exponent", {}, 1.0)},
                    run_bicoupling});
    list.push_back({"log_harnack",
                    "P_t log f(x) <= log P_t f(y) + K |x-y|^2 / (2(e^{2Kt}-1)) for a Gaussian semigroup",
                    {real("curvature", 0.0, "curvature K (0 = heat semigroup)"),
                     real("t", 1.0, "time", {}, 0.0),
                     typed("x", "vector", {1.0}, "left point"),
                     typed("y", "vector", {0.0}, "right point"),
                     typed("functions", "list", functions,
                           "test functions: constant, exponential, gaussian_bump, smoothed_indicator (floor > 0)"),
                     integer("nodes", 24, "Gauss-Hermite nodes per axis", 2)},
                    run_log_harnack});
    list.push_back({"mv_entropy_cost",
                    "k-NN entropy between mean-field particle clouds; measured t Ent / W2^2 constant",
                    {typed("field", "field", "mean-field-ou", "catalog field"),
                     typed("nu1", "law", dirac0, "first initial law"),
                     typed("nu2", "law", dirac1, "second initial law"),
                     real("horizon", 1.0, "time horizon", {}, 0.0),
                     integer("steps", 100, "Euler steps", 1),
                     typed("times", "real_list", {0.25, 0.5, 1.0}, "report times in (0, horizon]"),
                     integer("particles", 2000, "particles per cloud", 8),
                     integer("k", 5, "k-NN order", 1),
                     integer("batches", 4, "batches for error bars", 2),
                     real("rate_factor", 10.0, "rate check allowance", {}, 0.0)},
                    run_mv_entropy_cost});
    list.push_back({"w2_stability",
                    "Lipschitz ratio sup_t W2(P_t nu1, P_t nu2) / W2(nu1, nu2) of the mean-field flow",
                    {typed("field", "field", "mean-field-ou", "catalog field"),
                     typed("nu1", "law", {{"type", "gaussian"}, {"mean", {0.0}}, {"cov", {{1.0}}}}, "first initial law"),
                     typed("nu2", "law", {{"type", "gaussian"}, {"mean", {1.0}}, {"cov", {{1.0}}}}, "second initial law"),
                     real("horizon", 1.0, "time horizon", {}, 0.0),
                     integer("steps", 100, "Euler steps", 1),
                     integer("particles", 512, "particles per cloud", 2),
                     real("bound", nullptr, "fixed bound c; omit for exp(k T) from measured constants", {}, 0.0),
                     real("slack_factor", 1.2, "multiplier on the measured bound", {}, 0.0),
                     integer("report_points", 10, "evaluation times", 1)},
                    run_w2_stability});
    list.push_back({"exp_moment",
                    "Exponential-moment certificate E exp[lambda xi_t0 / (1 + k t0)] <= exp[lambda xi_0 + lambda A_t0] for xi = |B|^2",
                    {integer("dim", 1, "Brownian dimension", 1),
                     real("k1", 4.0, "drift and bracket constant", {}, 0.0),
                     real("lambda", 0.5, "exponent", {}, 0.0),
                     real("k", 10.0, "time-weight constant", {}, 0.0),
                     real("t0", 0.1, "evaluation time", {}, 0.0),
                     real("horizon", 0.2, "horizon T", {}, 0.0),
                     integer("steps", 100, "Euler steps on [0, t0]", 1),
                     integer("paths", 10000, "Monte Carlo paths", 2)},
                    run_exp_moment});
    list.push_back({"interpolation_bound",
                    "Ent(mu1|mu2) <= p Ent(mu1|mu) + (p-1) log sum (mu/mu2)^{p/(p-1)} mu2 on a finite set",
                    {typed("mu1", "real_list", {0.5, 0.5}, "masses of mu1"),
                     typed("mu2", "real_list", {0.25, 0.75}, "masses of mu2"),
                     typed("mu", "real_list", {0.5, 0.5}, "masses of mu"),
                     real("p", 2.0, "exponent", {}, 1.0)},
                    run_interpolation});
    return list;
}

} // namespace

const std::vector<Experiment>& experiments() {
    static const std::vector<Experiment> list = build();
    return list;
}

const Experiment* find_experiment(std::string_view name) {
    for (const auto& e : experiments())
        if (e.name == name) return &e;
    return nullptr;
}

std::string check_value(const ParamSpec& spec, const json& value) {
    const auto is_number_list = [](const json& j) {
        return j.is_array() && !j.empty() && std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_number(); });
    };
    const std::string& t = spec.type;
    if (t == "real" || t == "integer") {
        if (t == "real" && !value.is_number()) return "expected a number";
        if (t == "integer" && !value.is_number_integer()) return "expected an integer";
        const double v = value.get<double>();
        if (spec.minimum && v < *spec.minimum) return "must be >= " + json(*spec.minimum).dump();
        if (spec.exclusive_minimum && !(v > *spec.exclusive_minimum))
            return "must be > " + json(*spec.exclusive_minimum).dump();
        if (spec.maximum && v > *spec.maximum) return "must be <= " + json(*spec.maximum).dump();
        return {};
    }
    if (t == "bool") return value.is_boolean() ? "" : "expected true or false";
    if (t == "vector" || t == "real_list")
        return value.is_number() || is_number_list(value) ? "" : "expected a list of numbers";
    if (t == "matrix") {
        if (!value.is_array() || value.empty()) return "expected a list of rows";
        for (const auto& row : value)
            if (!is_number_list(row)) return "expected a list of rows of numbers";
        return {};
    }
    if (t == "field") {
        if (value.is_string()) return {};
        if (value.is_object() && value.contains("type") && value["type"].is_string()) return {};
        return "expected a field name or an object with a 'type'";
    }
    if (t == "law") return value.is_object() && value.contains("type") ? "" : "expected an object with a 'type'";
    if (t == "list") return value.is_array() ? "" : "expected a list";
    return "unsupported parameter type";
}

json parameter_schema(const Experiment& e) {
    json props = json::object();
    json required = json::array();
    for (const auto& p : e.params) {
        json s;
        if (p.type == "real") s = {{"type", "number"}};
        else if (p.type == "integer") s = {{"type", "integer"}};
        else if (p.type == "bool") s = {{"type", "boolean"}};
        else if (p.type == "vector" || p.type == "real_list") s = {{"type", json::array({"array", "number"})}};
        else if (p.type == "matrix") s = {{"type", "array"}, {"items", {{"type", "array"}, {"items", {{"type", "number"}}}}}};
        else if (p.type == "field")
            s = {{"oneOf", json::array({{{"type", "string"}, {"enum", field_names()}},
                                        {{"type", "object"}, {"required", {"type"}}}})}};
        else if (p.type == "law")
            s = {{"type", "object"}, {"required", {"type"}},
                 {"properties", {{"type", {{"enum", {"gaussian", "dirac", "points"}}}}}}};
        else s = {{"type", "array"}};
        if (p.minimum) s["minimum"] = *p.minimum;
        if (p.exclusive_minimum) s["exclusiveMinimum"] = *p.exclusive_minimum;
        if (p.maximum) s["maximum"] = *p.maximum;
        if (!p.default_value.is_null()) s["default"] = p.default_value;
        s["description"] = p.description;
        props[p.name] = s;
    }
    return {{"name", e.name},
            {"description", e.description},
            {"parameters",
             {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
              {"type", "object"},
              {"additionalProperties", false},
              {"properties", props},
              {"required", required}}}};
}

} // namespace bicouple::cli
