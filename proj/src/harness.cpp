#include "hartlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

#include "json.hpp"

#include "hartlab/errors.hpp"
#include "hartlab/haar.hpp"
#include "hartlab/rng.hpp"

namespace hartlab {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
    throw ConfigError("config" + (pointer.empty() ? std::string("/") : pointer) + ": " + what);
}

void expect_object(const json& j, const std::string& ptr) {
    if (!j.is_object()) fail(ptr, "expected an object");
}

void reject_unknown(const json& j, const std::string& ptr,
                    std::initializer_list<const char*> keys) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || item.key() == k;
        if (!known) fail(ptr + "/" + item.key(), "unknown key");
    }
}

double num_at(const json& j, const char* key, double dflt, const std::string& ptr) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_number()) fail(ptr + "/" + key, "expected a number");
    return v.get<double>();
}

int int_at(const json& j, const char* key, int dflt, const std::string& ptr) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_number_integer()) fail(ptr + "/" + key, "expected an integer");
    return v.get<int>();
}

std::uint64_t seed_at(const json& j, const char* key, std::uint64_t dflt, const std::string& ptr) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail(ptr + "/" + key, "expected a non-negative integer");
}

bool bool_at(const json& j, const char* key, bool dflt, const std::string& ptr) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_boolean()) fail(ptr + "/" + key, "expected a boolean");
    return v.get<bool>();
}

std::string str_at(const json& j, const char* key, const std::string& dflt,
                   const std::string& ptr) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_string()) fail(ptr + "/" + key, "expected a string");
    return v.get<std::string>();
}

std::vector<double> vec_at(const json& j, const char* key, const std::string& ptr) {
    const json& v = j.at(key);
    if (!v.is_array()) fail(ptr + "/" + key, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number())
            fail(ptr + "/" + key + "/" + std::to_string(i), "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

std::vector<std::vector<double>> mat_at(const json& j, const char* key, const std::string& ptr) {
    const json& v = j.at(key);
    if (!v.is_array()) fail(ptr + "/" + key, "expected an array of arrays");
    std::vector<std::vector<double>> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_array())
            fail(ptr + "/" + key + "/" + std::to_string(i), "expected an array of numbers");
        std::vector<double> row;
        row.reserve(v[i].size());
        for (std::size_t c = 0; c < v[i].size(); ++c) {
            if (!v[i][c].is_number())
                fail(ptr + "/" + key + "/" + std::to_string(i) + "/" + std::to_string(c),
                     "expected a number");
            row.push_back(v[i][c].get<double>());
        }
        out.push_back(std::move(row));
    }
    return out;
}

KernelKind kernel_kind_from(const std::string& name) {
    if (name == "zero") return KernelKind::zero;
    if (name == "hilbert1d") return KernelKind::hilbert1d;
    if (name == "riesz") return KernelKind::riesz;
    if (name == "power") return KernelKind::power;
    fail("/kernel/kind", "must be zero, hilbert1d, riesz, power, or custom");
}

Scenario parse_scenario(const json& j) {
    Scenario sc;
    expect_object(j, "");
    reject_unknown(j, "",
                   {"space", "kernel", "weights", "params", "seed", "grids", "diagnostics"});

    if (j.contains("space")) {
        const json& s = j.at("space");
        expect_object(s, "/space");
        reject_unknown(s, "/space",
                       {"type", "points", "base", "bessel_lambda", "lo", "hi", "a0", "coords",
                        "masses"});
        sc.space_type = str_at(s, "type", sc.space_type, "/space");
        sc.points = int_at(s, "points", sc.points, "/space");
        sc.base = str_at(s, "base", sc.base, "/space");
        sc.bessel_lambda = num_at(s, "bessel_lambda", sc.bessel_lambda, "/space");
        sc.lo = num_at(s, "lo", sc.lo, "/space");
        sc.hi = num_at(s, "hi", sc.hi, "/space");
        sc.a0 = num_at(s, "a0", sc.a0, "/space");
        if (s.contains("coords")) sc.coords = mat_at(s, "coords", "/space");
        if (s.contains("masses")) sc.masses = vec_at(s, "masses", "/space");
        if (sc.space_type == "points" && !s.contains("points"))
            sc.points = static_cast<int>(sc.coords.size());
    }

    if (j.contains("kernel")) {
        const json& k = j.at("kernel");
        expect_object(k, "/kernel");
        reject_unknown(k, "/kernel", {"kind", "kappa", "d_exp", "component", "entries"});
        sc.kernel_kind = str_at(k, "kind", sc.kernel_kind, "/kernel");
        sc.kernel.kappa = num_at(k, "kappa", sc.kernel.kappa, "/kernel");
        sc.kernel.d_exp = num_at(k, "d_exp", sc.kernel.d_exp, "/kernel");
        sc.kernel.component = int_at(k, "component", sc.kernel.component, "/kernel");
        if (k.contains("entries")) sc.entries = mat_at(k, "entries", "/kernel");
    }

    if (j.contains("weights")) {
        const json& w = j.at("weights");
        expect_object(w, "/weights");
        reject_unknown(w, "/weights",
                       {"family", "sigma", "a", "beta", "a_dual", "beta_dual", "spike_atom",
                        "spike_mass", "background", "u", "v"});
        sc.family = str_at(w, "family", sc.family, "/weights");
        sc.sigma = num_at(w, "sigma", sc.sigma, "/weights");
        sc.power_a = num_at(w, "a", sc.power_a, "/weights");
        sc.power_beta = num_at(w, "beta", sc.power_beta, "/weights");
        sc.power_a_dual = num_at(w, "a_dual", sc.power_a_dual, "/weights");
        sc.power_beta_dual = num_at(w, "beta_dual", sc.power_beta_dual, "/weights");
        sc.spike_atom = int_at(w, "spike_atom", sc.spike_atom, "/weights");
        sc.spike_mass = num_at(w, "spike_mass", sc.spike_mass, "/weights");
        sc.background = num_at(w, "background", sc.background, "/weights");
        if (w.contains("u")) sc.explicit_u = vec_at(w, "u", "/weights");
        if (w.contains("v")) sc.explicit_v = vec_at(w, "v", "/weights");
    }

    if (j.contains("params")) {
        const json& p = j.at("params");
        expect_object(p, "/params");
        reject_unknown(p, "/params",
                       {"kappa", "n", "lambda", "delta", "r", "eps", "k_min", "k_max"});
        sc.params.kappa = num_at(p, "kappa", sc.params.kappa, "/params");
        sc.params.n_dim = num_at(p, "n", sc.params.n_dim, "/params");
        sc.params.lambda = num_at(p, "lambda", sc.params.lambda, "/params");
        sc.delta = num_at(p, "delta", sc.delta, "/params");
        sc.r = int_at(p, "r", sc.r, "/params");
        sc.eps = num_at(p, "eps", sc.eps, "/params");
        sc.k_min = int_at(p, "k_min", sc.k_min, "/params");
        sc.k_max = int_at(p, "k_max", sc.k_max, "/params");
    }

    sc.seed = seed_at(j, "seed", sc.seed, "");
    sc.grids = int_at(j, "grids", sc.grids, "");

    if (j.contains("diagnostics")) {
        const json& d = j.at("diagnostics");
        expect_object(d, "/diagnostics");
        reject_unknown(d, "/diagnostics",
                       {"lemmas", "lemma_samples", "surgery_taus", "surgery_trials",
                        "surgery_level", "surgery_point", "timestamp"});
        sc.lemmas = bool_at(d, "lemmas", sc.lemmas, "/diagnostics");
        sc.lemma_samples = int_at(d, "lemma_samples", sc.lemma_samples, "/diagnostics");
        if (d.contains("surgery_taus")) sc.surgery_taus = vec_at(d, "surgery_taus", "/diagnostics");
        sc.surgery_trials = int_at(d, "surgery_trials", sc.surgery_trials, "/diagnostics");
        sc.surgery_level = int_at(d, "surgery_level", sc.surgery_level, "/diagnostics");
        sc.surgery_point = int_at(d, "surgery_point", sc.surgery_point, "/diagnostics");
        sc.emit_timestamp = bool_at(d, "timestamp", sc.emit_timestamp, "/diagnostics");
    }

    sc.validate();
    return sc;
}

json scenario_to_json(const Scenario& sc) {
    json space{{"type", sc.space_type}, {"points", sc.points}, {"base", sc.base},
               {"bessel_lambda", sc.bessel_lambda}, {"lo", sc.lo}, {"hi", sc.hi},
               {"a0", sc.a0}};
    if (!sc.coords.empty()) space["coords"] = sc.coords;
    if (!sc.masses.empty()) space["masses"] = sc.masses;

    json kernel{{"kind", sc.kernel_kind},
                {"kappa", sc.kernel.kappa},
                {"d_exp", sc.kernel.d_exp},
                {"component", sc.kernel.component}};
    if (!sc.entries.empty()) kernel["entries"] = sc.entries;

    json weights{{"family", sc.family},       {"sigma", sc.sigma},
                 {"a", sc.power_a},           {"beta", sc.power_beta},
                 {"a_dual", sc.power_a_dual}, {"beta_dual", sc.power_beta_dual},
                 {"spike_atom", sc.spike_atom}, {"spike_mass", sc.spike_mass},
                 {"background", sc.background}};
    if (!sc.explicit_u.empty()) weights["u"] = sc.explicit_u;
    if (!sc.explicit_v.empty()) weights["v"] = sc.explicit_v;

    json params{{"kappa", sc.params.kappa}, {"n", sc.params.n_dim},
                {"lambda", sc.params.lambda}, {"delta", sc.delta},
                {"r", sc.r},                {"eps", sc.eps},
                {"k_min", sc.k_min},        {"k_max", sc.k_max}};

    json diagnostics{{"lemmas", sc.lemmas},
                     {"lemma_samples", sc.lemma_samples},
                     {"surgery_taus", sc.surgery_taus},
                     {"surgery_trials", sc.surgery_trials},
                     {"surgery_level", sc.surgery_level},
                     {"surgery_point", sc.surgery_point},
                     {"timestamp", sc.emit_timestamp}};

    return json{{"space", std::move(space)},   {"kernel", std::move(kernel)},
                {"weights", std::move(weights)}, {"params", std::move(params)},
                {"seed", sc.seed},             {"grids", sc.grids},
                {"diagnostics", std::move(diagnostics)}};
}

DyadicParams grid_params(const Scenario& sc, const Space& space) {
    DyadicParams p;
    p.mode = space.sorted_line() ? DyadicMode::shifted1d : DyadicMode::generic;
    p.delta = sc.delta;
    p.k_min = sc.k_min;
    p.k_max = sc.k_max;
    return p;
}

std::vector<double> lognormal_weight(int n, double sigma, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (double& x : w) x = std::exp(sigma * rng.normal());
    return w;
}

// |coord - anchor|^beta with the distance clamped away from zero at half the
// resolution so negative exponents stay finite.
std::vector<double> power_weight(const Space& space, double anchor, double beta) {
    std::vector<double> w(static_cast<std::size_t>(space.size()));
    const double clamp = space.resolution() / 2.0;
    for (int i = 0; i < space.size(); ++i) {
        double sq = 0.0;
        for (int k = 0; k < space.dim(); ++k) {
            const double dx = space.coord(i, k) - anchor;
            sq += dx * dx;
        }
        w[static_cast<std::size_t>(i)] = std::pow(std::max(std::sqrt(sq), clamp), beta);
    }
    return w;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const char* fmt17(double x, char (&buf)[64]) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json argmax_json(const ArgMax& a) { return json{{"grid", a.grid}, {"cube", a.cube}}; }

json measured_json(const MeasuredConstant& c) {
    return json{{"value", c.value}, {"samples", c.samples}};
}

// Nearest-rank quantile on an ascending vector.
double quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const std::size_t n = sorted.size();
    const std::size_t rank =
        std::min(n - 1, static_cast<std::size_t>(std::ceil(p * static_cast<double>(n))) -
                            (p > 0.0 ? 1 : 0));
    return sorted[rank];
}

}  // namespace

Scenario Scenario::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_scenario(j);
}

Scenario Scenario::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_string(buf.str());
}

void Scenario::validate() const {
    const bool is_points = space_type == "points";
    if (space_type != "grid1d" && space_type != "grid2d" && space_type != "tree" && !is_points)
        fail("/space/type", "must be grid1d, grid2d, tree, or points");
    if (is_points) {
        if (coords.empty()) fail("/space/coords", "required when type is points");
        if (masses.size() != coords.size())
            fail("/space/masses", "must have one entry per point");
        for (const auto& row : coords)
            if (row.size() != coords.front().size())
                fail("/space/coords", "rows must share a dimension");
    } else {
        if (points < 2) fail("/space/points", "need at least two points");
        if (!coords.empty() || !masses.empty())
            fail("/space/coords", "only allowed when type is points");
    }
    if (base != "lebesgue" && base != "bessel") fail("/space/base", "must be lebesgue or bessel");
    if (base == "bessel" && space_type != "grid1d")
        fail("/space/base", "bessel base requires a grid1d space");
    if (!(hi > lo)) fail("/space/hi", "must exceed lo");
    if (!(a0 >= 1.0)) fail("/space/a0", "quasi-metric constant must be >= 1");

    if (kernel_kind != "zero" && kernel_kind != "hilbert1d" && kernel_kind != "riesz" &&
        kernel_kind != "power" && kernel_kind != "custom")
        fail("/kernel/kind", "must be zero, hilbert1d, riesz, power, or custom");
    if (kernel_kind == "custom") {
        if (entries.empty()) fail("/kernel/entries", "required when kind is custom");
        for (const auto& row : entries)
            if (row.size() != entries.size())
                fail("/kernel/entries", "must be a square matrix");
    } else if (!entries.empty()) {
        fail("/kernel/entries", "only allowed when kind is custom");
    }
    if (!(kernel.kappa > 0.0 && kernel.kappa <= 1.0))
        fail("/kernel/kappa", "must lie in (0, 1]");

    if (family != "power" && family != "lognormal" && family != "disjoint" &&
        family != "spike" && family != "explicit")
        fail("/weights/family", "must be power, lognormal, disjoint, spike, or explicit");
    if (!(sigma > 0.0)) fail("/weights/sigma", "must be positive");
    if (family == "power" && (space_type == "tree"))
        fail("/weights/family", "power weights need point coordinates");
    if (!(spike_mass > 0.0)) fail("/weights/spike_mass", "must be positive");
    if (background < 0.0) fail("/weights/background", "must be non-negative");
    if (family == "spike" && spike_atom >= points)
        fail("/weights/spike_atom", "out of range");
    if (family == "explicit") {
        const std::size_t n = is_points ? coords.size() : static_cast<std::size_t>(points);
        if (explicit_u.size() != n) fail("/weights/u", "must have one entry per point");
        if (explicit_v.size() != n) fail("/weights/v", "must have one entry per point");
        for (double x : explicit_u)
            if (!(x >= 0.0)) fail("/weights/u", "entries must be non-negative");
        for (double x : explicit_v)
            if (!(x >= 0.0)) fail("/weights/v", "entries must be non-negative");
    } else if (!explicit_u.empty() || !explicit_v.empty()) {
        fail("/weights/u", "only allowed when family is explicit");
    }

    try {
        params.validate();
    } catch (const ConfigError& e) {
        fail("/params", e.what());
    }
    if (!(delta > 0.0 && delta < 1.0)) fail("/params/delta", "must lie in (0, 1)");
    if (r < 0) fail("/params/r", "must be non-negative");
    if (!(eps > 0.0 && eps <= 1.0)) fail("/params/eps", "must lie in (0, 1]");
    if (k_min < 0) fail("/params/k_min", "must be non-negative");
    if (k_max != DyadicParams::kAutoDepth && k_max < k_min)
        fail("/params/k_max", "must be at least k_min");

    if (grids < 1) fail("/grids", "need at least one grid");
    for (double tau : surgery_taus)
        if (!(tau >= 0.0 && tau <= 1.0)) fail("/diagnostics/surgery_taus", "must lie in [0, 1]");
    if (surgery_trials < 1) fail("/diagnostics/surgery_trials", "must be positive");
    if (surgery_level < 0) fail("/diagnostics/surgery_level", "must be non-negative");
    if (surgery_point >= points) fail("/diagnostics/surgery_point", "out of range");
    if (lemma_samples < 1) fail("/diagnostics/lemma_samples", "must be positive");
}

std::string Scenario::to_canonical_json() const {
    return scenario_to_json(*this).dump(2);
}

Space make_space(const Scenario& sc) {
    if (sc.space_type == "grid1d")
        return Space::grid1d(sc.points, sc.lo, sc.hi,
                             sc.base == "bessel" ? BaseKind::bessel : BaseKind::lebesgue,
                             sc.bessel_lambda, sc.a0);
    if (sc.space_type == "grid2d") return Space::grid2d(sc.points, sc.lo, sc.hi, sc.a0);
    if (sc.space_type == "tree") return Space::tree(sc.points);
    return Space::from_points(sc.coords, sc.masses, sc.a0);
}

OperatorMatrix make_operator(const Scenario& sc, const Space& space) {
    if (sc.kernel_kind == "custom") {
        const int n = space.size();
        if (static_cast<int>(sc.entries.size()) != n)
            fail("/kernel/entries", "must be points x points");
        Eigen::MatrixXd e(n, n);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < n; ++c)
                e(i, c) = sc.entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        return OperatorMatrix::from_entries(space, e);
    }
    Kernel k = sc.kernel;
    k.kind = kernel_kind_from(sc.kernel_kind);
    return OperatorMatrix::assemble(space, k);
}

std::pair<Measure, Measure> make_weights(const Scenario& sc, const Space& space,
                                         std::uint64_t seed) {
    const int n = space.size();
    if (sc.family == "power") {
        return {Measure::validated(power_weight(space, sc.power_a, sc.power_beta), true),
                Measure::validated(power_weight(space, sc.power_a_dual, sc.power_beta_dual),
                                   true)};
    }
    if (sc.family == "lognormal") {
        Rng ru = Rng::stream(seed, "weight-u");
        Rng rv = Rng::stream(seed, "weight-v");
        return {Measure::validated(lognormal_weight(n, sc.sigma, ru), true),
                Measure::validated(lognormal_weight(n, sc.sigma, rv), true)};
    }
    if (sc.family == "disjoint") {
        Rng ru = Rng::stream(seed, "weight-u");
        Rng rv = Rng::stream(seed, "weight-v");
        Rng rm = Rng::stream(seed, "weight-mask");
        std::vector<double> u = lognormal_weight(n, sc.sigma, ru);
        std::vector<double> v = lognormal_weight(n, sc.sigma, rv);
        std::vector<bool> mask(static_cast<std::size_t>(n));
        int ones = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            mask[i] = rm.uniform01() < 0.5;
            ones += mask[i] ? 1 : 0;
        }
        // keep both weights non-trivial
        if (ones == 0) mask[0] = true;
        if (ones == n) mask[0] = false;
        for (std::size_t i = 0; i < mask.size(); ++i)
            (mask[i] ? v : u)[i] = 0.0;
        return {Measure::validated(std::move(u), false),
                Measure::validated(std::move(v), false)};
    }
    if (sc.family == "spike") {
        Rng ru = Rng::stream(seed, "weight-u");
        std::vector<double> u = lognormal_weight(n, sc.sigma, ru);
        std::vector<double> v(static_cast<std::size_t>(n), sc.background);
        int atom = sc.spike_atom;
        if (atom < 0)
            atom = static_cast<int>(Rng::stream(seed, "weight-spike")
                                        .below(static_cast<std::uint64_t>(n)));
        v[static_cast<std::size_t>(atom)] = sc.spike_mass;
        return {Measure::validated(std::move(u), true),
                Measure::validated(std::move(v), sc.background > 0.0)};
    }
    // explicit
    return {Measure::validated(sc.explicit_u, false), Measure::validated(sc.explicit_v, false)};
}

std::vector<DyadicSystem> make_grids(const Scenario& sc, const Space& space, std::uint64_t seed) {
    const DyadicParams p = grid_params(sc, space);
    std::vector<DyadicSystem> out;
    out.reserve(static_cast<std::size_t>(sc.grids));
    for (int g = 0; g < sc.grids; ++g)
        out.push_back(DyadicSystem::build(
            space, p, Rng::stream(seed, "grid", static_cast<std::uint64_t>(g)).next_u64()));
    return out;
}

RunReport run_scenario(const Scenario& sc) {
    sc.validate();
    const Space space = make_space(sc);
    const OperatorMatrix m = make_operator(sc, space);
    const auto [u, v] = make_weights(sc, space, sc.seed);
    const std::vector<DyadicSystem> grids = make_grids(sc, space, sc.seed);
    std::vector<const DyadicSystem*> ptrs;
    ptrs.reserve(grids.size());
    for (const DyadicSystem& g : grids) ptrs.push_back(&g);

    RunReport rep;
    rep.scenario = sc.to_canonical_json();
    rep.seed = sc.seed;
    rep.points = space.size();
    rep.resolution = space.resolution();
    rep.constants = compute_constants(ptrs, m, u, v, sc.params);
    rep.common_atom = rep.constants.common_atom;

    const DyadicSystem& du = grids[0];
    const DyadicSystem& dv = grids[1 % grids.size()];
    const double pooled_piv = std::max(rep.constants.pivotal, rep.constants.pivotal_dual);
    const double piv = pooled_piv > 0.0 ? pooled_piv : 1.0;
    const StoppingForest forest = build_stopping_cubes(du, u, v, piv, sc.params);
    const Corona corona = build_coronas(forest, du, dv, sc.r);

    rep.corona.stopping_cubes = static_cast<int>(forest.members.size());
    rep.corona.max_generation = forest.max_generation();
    rep.corona.pivotal_used = piv;
    const CoronaVerification mass =
        verify_corona_carleson(forest, corona, m, u, v, CoronaMode::stopping_mass, sc.params);
    rep.corona.quarter_passed = mass.passed;
    rep.corona.quarter_max = mass.constant;
    rep.corona.generation_excess = mass.details.at("generation_excess");
    rep.corona.carleson_mass = mass.details.at("carleson_mass");
    for (CoronaMode mode : {CoronaMode::paraproduct, CoronaMode::alpha, CoronaMode::beta,
                            CoronaMode::gamma}) {
        const CoronaVerification res =
            verify_corona_carleson(forest, corona, m, u, v, mode, sc.params);
        rep.corona.measured[to_string(mode)] = res.constant;
        if (mode == CoronaMode::alpha)
            for (const auto& [key, val] : res.details)
                rep.corona.measured["alpha_" + key] = val;
    }

    if (sc.lemmas) {
        rep.lemmas_run = true;
        const HaarBasis basis_v = HaarBasis::build(du, v);
        rep.lemma_offsupport =
            offsupport_ratio(du, m, basis_v, u, v, sc.params, sc.lemma_samples,
                             Rng::stream(sc.seed, "lemma-offsupport").next_u64());
        rep.lemma_decay = decay_ratio(du, u, sc.params, sc.lemma_samples,
                                      Rng::stream(sc.seed, "lemma-decay").next_u64());
        rep.lemma_wbp = weak_boundedness(du, dv, m, u, v, sc.r);
    }

    rep.surgery = surgery_table(sc, space);

    if (sc.emit_timestamp) rep.timestamp = utc_timestamp();
    return rep;
}

std::vector<SurgeryRow> surgery_table(const Scenario& sc, const Space& space) {
    const DyadicParams sp = grid_params(sc, space);
    const int point = sc.surgery_point >= 0 ? sc.surgery_point : space.size() / 2;
    std::vector<SurgeryRow> rows;
    rows.reserve(sc.surgery_taus.size());
    for (std::size_t i = 0; i < sc.surgery_taus.size(); ++i) {
        const double tau = sc.surgery_taus[i];
        const SurgeryEstimate est = surgery_probability(
            space, sp, point, sc.surgery_level, tau, sc.surgery_trials,
            Rng::stream(sc.seed, "surgery", static_cast<std::uint64_t>(i)).next_u64());
        SurgeryRow row;
        row.tau = tau;
        row.estimate = est.probability;
        row.stderr_est = est.stderr_;
        row.analytic = sp.mode == DyadicMode::shifted1d ? std::min(1.0, 2.0 * tau) : -1.0;
        rows.push_back(row);
    }
    return rows;
}

std::vector<SurgeryRow> surgery_table(const Scenario& sc) {
    sc.validate();
    const Space space = make_space(sc);
    return surgery_table(sc, space);
}

std::string surgery_csv(const std::vector<SurgeryRow>& rows) {
    std::string out = "tau,estimate,stderr,analytic_1d\n";
    char b[64];
    for (const SurgeryRow& row : rows) {
        out += fmt17(row.tau, b);
        out += ',';
        out += fmt17(row.estimate, b);
        out += ',';
        out += fmt17(row.stderr_est, b);
        out += ',';
        if (row.analytic >= 0.0) out += fmt17(row.analytic, b);
        out += '\n';
    }
    return out;
}

bool CoronaRunReport::passed() const {
    for (const CoronaVerification& res : results)
        if (!res.passed) return false;
    return diag.quarter_passed;
}

std::string CoronaRunReport::to_json() const {
    json arr = json::array();
    for (const CoronaVerification& res : results)
        arr.push_back({{"mode", to_string(res.mode)},
                       {"constant", res.constant},
                       {"hard_bound", res.hard_bound},
                       {"passed", res.passed},
                       {"details", res.details}});
    const json j{{"stopping_cubes", diag.stopping_cubes},
                 {"max_generation", diag.max_generation},
                 {"pivotal_used", diag.pivotal_used},
                 {"quarter_passed", diag.quarter_passed},
                 {"quarter_max", diag.quarter_max},
                 {"generation_excess", diag.generation_excess},
                 {"carleson_mass", diag.carleson_mass},
                 {"results", std::move(arr)},
                 {"passed", passed()}};
    return j.dump(2) + "\n";
}

std::string CoronaRunReport::to_csv() const {
    std::string out = "mode,constant,hard_bound,passed\n";
    char b[64];
    for (const CoronaVerification& res : results) {
        out += to_string(res.mode);
        out += ',';
        out += fmt17(res.constant, b);
        out += ',';
        out += res.hard_bound ? '1' : '0';
        out += ',';
        out += res.passed ? '1' : '0';
        out += '\n';
    }
    return out;
}

CoronaRunReport run_corona(const Scenario& sc, const std::vector<CoronaMode>& modes) {
    sc.validate();
    const Space space = make_space(sc);
    const OperatorMatrix m = make_operator(sc, space);
    const auto [u, v] = make_weights(sc, space, sc.seed);
    const std::vector<DyadicSystem> grids = make_grids(sc, space, sc.seed);
    std::vector<const DyadicSystem*> ptrs;
    ptrs.reserve(grids.size());
    for (const DyadicSystem& g : grids) ptrs.push_back(&g);
    const ConstantsReport rep = compute_constants(ptrs, m, u, v, sc.params);

    const double pooled = std::max(rep.pivotal, rep.pivotal_dual);
    const double piv = pooled > 0.0 ? pooled : 1.0;
    const StoppingForest forest = build_stopping_cubes(grids[0], u, v, piv, sc.params);
    const Corona corona = build_coronas(forest, grids[0], grids[1 % grids.size()], sc.r);

    CoronaRunReport out;
    out.diag.stopping_cubes = static_cast<int>(forest.members.size());
    out.diag.max_generation = forest.max_generation();
    out.diag.pivotal_used = piv;
    const CoronaVerification mass =
        verify_corona_carleson(forest, corona, m, u, v, CoronaMode::stopping_mass, sc.params);
    out.diag.quarter_passed = mass.passed;
    out.diag.quarter_max = mass.constant;
    out.diag.generation_excess = mass.details.at("generation_excess");
    out.diag.carleson_mass = mass.details.at("carleson_mass");

    for (CoronaMode mode : modes) {
        if (mode == CoronaMode::stopping_mass) {
            out.results.push_back(mass);
            continue;
        }
        out.results.push_back(
            verify_corona_carleson(forest, corona, m, u, v, mode, sc.params));
    }
    return out;
}

std::string RunReport::to_json() const {
    json j;
    j["scenario"] = json::parse(scenario);
    j["run"] = {{"seed", seed}, {"points", points}, {"resolution", resolution}};
    if (!timestamp.empty()) j["run"]["generated_at"] = timestamp;

    json per_grid = json::array();
    for (const GridConstants& g : constants.per_grid)
        per_grid.push_back({{"seed", g.seed},
                            {"a2", g.a2.forward},
                            {"a2_dual", g.a2.dual},
                            {"testing", g.testing.forward},
                            {"testing_dual", g.testing.dual},
                            {"pivotal", g.pivotal.forward},
                            {"pivotal_dual", g.pivotal.dual}});
    j["constants"] = {{"a2", constants.a2},
                      {"a2_dual", constants.a2_dual},
                      {"testing", constants.testing},
                      {"testing_dual", constants.testing_dual},
                      {"pivotal", constants.pivotal},
                      {"pivotal_dual", constants.pivotal_dual},
                      {"norm", constants.norm},
                      {"ratio", constants.ratio},
                      {"truncation", constants.truncation},
                      {"psi_mode", constants.psi_mode},
                      {"common_atom", constants.common_atom},
                      {"argmax",
                       {{"a2", argmax_json(constants.where_a2)},
                        {"a2_dual", argmax_json(constants.where_a2_dual)},
                        {"testing", argmax_json(constants.where_testing)},
                        {"testing_dual", argmax_json(constants.where_testing_dual)},
                        {"pivotal", argmax_json(constants.where_pivotal)},
                        {"pivotal_dual", argmax_json(constants.where_pivotal_dual)}}},
                      {"per_grid", std::move(per_grid)}};

    j["corona"] = {{"stopping_cubes", corona.stopping_cubes},
                   {"max_generation", corona.max_generation},
                   {"pivotal_used", corona.pivotal_used},
                   {"quarter_passed", corona.quarter_passed},
                   {"quarter_max", corona.quarter_max},
                   {"generation_excess", corona.generation_excess},
                   {"carleson_mass", corona.carleson_mass},
                   {"measured", corona.measured}};

    if (lemmas_run)
        j["lemmas"] = {{"offsupport", measured_json(lemma_offsupport)},
                       {"decay", measured_json(lemma_decay)},
                       {"wbp", measured_json(lemma_wbp)}};

    if (!surgery.empty()) {
        json table = json::array();
        for (const SurgeryRow& row : surgery) {
            json r{{"tau", row.tau}, {"estimate", row.estimate}, {"stderr", row.stderr_est}};
            if (row.analytic >= 0.0)
                r["analytic"] = row.analytic;
            else
                r["analytic"] = nullptr;
            table.push_back(std::move(r));
        }
        j["surgery"] = std::move(table);
    }

    j["passed"] = passed();
    return j.dump(2) + "\n";
}

std::string RunReport::to_csv() const {
    std::string out =
        "grid,seed,a2,a2_dual,testing,testing_dual,pivotal,pivotal_dual,norm,ratio\n";
    char b[64];
    for (std::size_t g = 0; g < constants.per_grid.size(); ++g) {
        const GridConstants& gc = constants.per_grid[g];
        out += std::to_string(g);
        out += ',';
        out += std::to_string(gc.seed);
        for (double x : {gc.a2.forward, gc.a2.dual, gc.testing.forward, gc.testing.dual,
                         gc.pivotal.forward, gc.pivotal.dual, constants.norm,
                         constants.ratio}) {
            out += ',';
            out += fmt17(x, b);
        }
        out += '\n';
    }
    out += "pooled,";
    out += std::to_string(seed);
    for (double x : {constants.a2, constants.a2_dual, constants.testing, constants.testing_dual,
                     constants.pivotal, constants.pivotal_dual, constants.norm,
                     constants.ratio}) {
        out += ',';
        out += fmt17(x, b);
    }
    out += '\n';
    return out;
}

EnsembleSummary run_ensemble(const Scenario& sc, int trials) {
    if (trials < 1) throw ConfigError("run_ensemble: trials must be at least 1");
    sc.validate();
    const Space space = make_space(sc);
    const OperatorMatrix m = make_operator(sc, space);

    EnsembleSummary sum;
    sum.points = space.size();
    sum.trials = trials;
    sum.rows.resize(static_cast<std::size_t>(trials));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(trials));

    std::atomic<int> next{0};
    const auto worker = [&]() {
        for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) {
            try {
                const std::uint64_t tseed =
                    t == 0 ? sc.seed
                           : Rng::stream(sc.seed, "trial", static_cast<std::uint64_t>(t))
                                 .next_u64();
                const auto [u, v] = make_weights(sc, space, tseed);
                const std::vector<DyadicSystem> grids = make_grids(sc, space, tseed);
                std::vector<const DyadicSystem*> ptrs;
                ptrs.reserve(grids.size());
                for (const DyadicSystem& g : grids) ptrs.push_back(&g);
                const ConstantsReport rep = compute_constants(ptrs, m, u, v, sc.params);

                const double pooled_piv = std::max(rep.pivotal, rep.pivotal_dual);
                const double piv = pooled_piv > 0.0 ? pooled_piv : 1.0;
                const StoppingForest forest =
                    build_stopping_cubes(grids[0], u, v, piv, sc.params);
                const Corona corona =
                    build_coronas(forest, grids[0], grids[1 % grids.size()], sc.r);
                const CoronaVerification mass = verify_corona_carleson(
                    forest, corona, m, u, v, CoronaMode::stopping_mass, sc.params);

                TrialRow row;
                row.trial = t;
                row.seed = tseed;
                row.a2 = std::max(rep.a2, rep.a2_dual);
                row.testing = std::max(rep.testing, rep.testing_dual);
                row.pivotal = std::max(rep.pivotal, rep.pivotal_dual);
                row.norm = rep.norm;
                row.ratio = rep.ratio;
                row.quarter_passed = mass.passed;
                sum.rows[static_cast<std::size_t>(t)] = row;
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        }
    };

    const unsigned hw = std::thread::hardware_concurrency();
    const int workers = std::clamp(trials, 1, hw > 0 ? static_cast<int>(std::min(hw, 8u)) : 4);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<double> ratios;
    ratios.reserve(sum.rows.size());
    double total = 0.0;
    for (const TrialRow& row : sum.rows) {
        ratios.push_back(row.ratio);
        total += row.ratio;
        sum.all_finite = sum.all_finite && std::isfinite(row.ratio) && std::isfinite(row.norm);
        sum.all_passed = sum.all_passed && row.quarter_passed;
    }
    std::sort(ratios.begin(), ratios.end());
    sum.ratio_mean = total / static_cast<double>(trials);
    sum.ratio_min = ratios.front();
    sum.ratio_p25 = quantile(ratios, 0.25);
    sum.ratio_median = quantile(ratios, 0.50);
    sum.ratio_p75 = quantile(ratios, 0.75);
    sum.ratio_p95 = quantile(ratios, 0.95);
    sum.ratio_max = ratios.back();
    return sum;
}

std::string EnsembleSummary::to_json() const {
    json rows_json = json::array();
    for (const TrialRow& row : rows)
        rows_json.push_back({{"trial", row.trial},
                             {"seed", row.seed},
                             {"a2", row.a2},
                             {"testing", row.testing},
                             {"pivotal", row.pivotal},
                             {"norm", row.norm},
                             {"ratio", row.ratio},
                             {"quarter_passed", row.quarter_passed}});
    const json j{{"points", points},
                 {"trials", trials},
                 {"ratio",
                  {{"mean", ratio_mean},
                   {"min", ratio_min},
                   {"p25", ratio_p25},
                   {"median", ratio_median},
                   {"p75", ratio_p75},
                   {"p95", ratio_p95},
                   {"max", ratio_max}}},
                 {"all_finite", all_finite},
                 {"all_passed", all_passed},
                 {"rows", std::move(rows_json)}};
    return j.dump(2) + "\n";
}

std::string EnsembleSummary::to_csv() const {
    std::string out = "trial,seed,a2,testing,pivotal,norm,ratio,quarter_passed\n";
    char b[64];
    for (const TrialRow& row : rows) {
        out += std::to_string(row.trial);
        out += ',';
        out += std::to_string(row.seed);
        for (double x : {row.a2, row.testing, row.pivotal, row.norm, row.ratio}) {
            out += ',';
            out += fmt17(x, b);
        }
        out += ',';
        out += row.quarter_passed ? '1' : '0';
        out += '\n';
    }
    return out;
}

EnsemblePair run_ensemble_pair(const Scenario& sc, int trials) {
    if (sc.space_type == "points")
        throw ConfigError("run_ensemble_pair: needs a generated space type");
    EnsemblePair pair;
    pair.base = run_ensemble(sc, trials);
    Scenario doubled = sc;
    doubled.points = sc.points * 2;
    pair.doubled = run_ensemble(doubled, trials);
    pair.max_growth =
        pair.base.ratio_max > 0.0 ? pair.doubled.ratio_max / pair.base.ratio_max : 0.0;
    return pair;
}

std::string EnsemblePair::to_json() const {
    const json j{{"base", json::parse(base.to_json())},
                 {"doubled", json::parse(doubled.to_json())},
                 {"max_growth", max_growth}};
    return j.dump(2) + "\n";
}

}  // namespace hartlab
