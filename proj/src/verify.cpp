#include "hartlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hartlab/errors.hpp"
#include "hartlab/haar.hpp"
#include "hartlab/rng.hpp"

namespace hartlab {
namespace {

using nlohmann::json;

struct Context {
    const Scenario& sc;
    Space space;
    OperatorMatrix m;
    Measure u, v;
    std::vector<DyadicSystem> grids;

    explicit Context(const Scenario& s)
        : sc(s), space(make_space(s)), m(make_operator(s, space)) {
        auto [wu, wv] = make_weights(s, space, s.seed);
        u = std::move(wu);
        v = std::move(wv);
        grids = make_grids(s, space, s.seed);
    }
    const DyadicSystem& du() const { return grids[0]; }
    const DyadicSystem& dv() const { return grids[1 % grids.size()]; }
};

void add(std::vector<CheckResult>& out, const std::string& name, double value, double bound,
         bool hard = true) {
    CheckResult c;
    c.name = name;
    c.value = value;
    c.bound = bound;
    c.hard = hard;
    c.passed = !hard || value <= bound;
    out.push_back(std::move(c));
}

std::vector<double> random_f(const Context& ctx, std::uint64_t index) {
    Rng rng = Rng::stream(ctx.sc.seed, "verify", index);
    std::vector<double> f(static_cast<std::size_t>(ctx.space.size()));
    for (double& x : f) x = rng.uniform(-1.0, 1.0);
    return f;
}

bool has_point(const Cube& q, int point) {
    return std::binary_search(q.members.begin(), q.members.end(), point);
}

bool member_subset(const std::vector<std::int32_t>& inner,
                   const std::vector<std::int32_t>& outer) {
    return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

std::vector<int> sorted_levels(const DyadicSystem& d) {
    std::set<int> levels;
    for (const Cube& q : d.cubes()) levels.insert(q.level);
    return {levels.begin(), levels.end()};
}

// --- space -----------------------------------------------------------------

void check_space(const Context& ctx, std::vector<CheckResult>& out) {
    const Space& s = ctx.space;
    const int n = s.size();

    double worst = 0.0;
    if (static_cast<long long>(n) * n * n <= 2'000'000LL) {
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z) {
                    if (x == y) continue;
                    const double lhs = s.dist(x, y);
                    const double rhs = s.a0() * (s.dist(x, z) + s.dist(z, y));
                    if (rhs > 0.0) worst = std::max(worst, lhs / rhs);
                }
    } else {
        Rng rng = Rng::stream(ctx.sc.seed, "verify-triples");
        for (int t = 0; t < 2'000'000; ++t) {
            const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            const int z = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            if (x == y) continue;
            const double rhs = s.a0() * (s.dist(x, z) + s.dist(z, y));
            if (rhs > 0.0) worst = std::max(worst, s.dist(x, y) / rhs);
        }
    }
    add(out, "space.quasi_triangle", worst, 1.0 + 1e-12);

    // ball_measure must be nondecreasing in the radius
    double decrease = 0.0;
    const int step = std::max(1, n / 32);
    for (int x = 0; x < n; x += step) {
        double prev = -1.0;
        for (double r : s.neighbor_dists(x)) {
            const double b = s.ball_measure(x, r + s.resolution() / 2.0, s.mu());
            if (prev >= 0.0) decrease = std::max(decrease, prev - b);
            prev = b;
        }
    }
    add(out, "space.ball_monotone", decrease, 0.0);

    const auto [c_mu, n_est] = s.estimate_doubling(s.resolution(), s.diameter());
    add(out, "space.doubling_finite", std::isfinite(c_mu) && c_mu > 0.0 ? 0.0 : 1.0, 0.0);
    add(out, "space.doubling_c_mu", c_mu, 0.0, false);
    add(out, "space.dimension_estimate", n_est, 0.0, false);
}

// --- dyadic ----------------------------------------------------------------

void check_dyadic(const Context& ctx, std::vector<CheckResult>& out) {
    const int n = ctx.space.size();
    double partition_bad = 0.0, nesting_bad = 0.0, lookup_bad = 0.0, outer_ratio = 0.0;

    for (const DyadicSystem& d : ctx.grids) {
        for (int k : sorted_levels(d)) {
            std::vector<int> seen(static_cast<std::size_t>(n), 0);
            for (int id : d.level_cubes(k))
                for (std::int32_t x : d.cube(id).members) ++seen[static_cast<std::size_t>(x)];
            for (int x = 0; x < n; ++x)
                if (seen[static_cast<std::size_t>(x)] != 1) partition_bad += 1.0;
            for (int x = 0; x < n; ++x) {
                const int id = d.cube_of(k, x);
                if (id < 0 || !has_point(d.cube(id), x)) lookup_bad += 1.0;
            }
        }
        for (const Cube& q : d.cubes()) {
            if (q.parent >= 0) {
                const Cube& p = d.cube(q.parent);
                if (!member_subset(q.members, p.members) || p.level != q.level - 1)
                    nesting_bad += 1.0;
            }
            if (q.side > 0.0 && q.center >= 0)
                for (std::int32_t x : q.members)
                    outer_ratio =
                        std::max(outer_ratio, ctx.space.dist(q.center, x) / q.side);
        }
    }
    add(out, "dyadic.level_partition", partition_bad, 0.0);
    add(out, "dyadic.nestedness", nesting_bad, 0.0);
    add(out, "dyadic.cube_lookup", lookup_bad, 0.0);
    add(out, "dyadic.outer_ball_ratio", outer_ratio, 0.0, false);
}

// --- haar ------------------------------------------------------------------

void check_haar(const Context& ctx, std::vector<CheckResult>& out) {
    const DyadicSystem& d = ctx.du();
    const HaarBasis basis = HaarBasis::build(d, ctx.u);
    const int n = ctx.space.size();

    struct Tagged {
        const HaarFunction* h;
        std::int32_t cube;
    };
    std::vector<Tagged> all;
    for (int id = 0; id < d.num_cubes(); ++id)
        for (const HaarFunction& h : basis.functions(id)) all.push_back({&h, h.cube});

    double ortho = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i; j < all.size(); ++j) {
            const Cube& qi = d.cube(all[i].cube);
            const Cube& qj = d.cube(all[j].cube);
            const Cube& small = qi.members.size() <= qj.members.size() ? qi : qj;
            if (&qi != &qj && !member_subset(small.members,
                                             (&small == &qi ? qj : qi).members))
                continue;  // disjoint supports: exactly orthogonal
            double dot = 0.0;
            for (std::int32_t x : small.members)
                dot += basis.value(*all[i].h, x) * basis.value(*all[j].h, x) *
                       ctx.u.atoms[static_cast<std::size_t>(x)];
            const double want = i == j ? 1.0 : 0.0;
            ortho = std::max(ortho, std::abs(dot - want));
        }
    add(out, "haar.orthonormality", ortho, 1e-10);

    const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    double cancel = 0.0;
    for (const Tagged& t : all)
        cancel = std::max(cancel, std::abs(basis.coefficient(*t.h, ones)));
    add(out, "haar.cancellation", cancel, 1e-10);

    double parseval = 0.0, recon = 0.0;
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
        const std::vector<double> f = random_f(ctx, trial);
        const double norm2 = basis.inner(f, f);
        double sum = 0.0;
        std::vector<double> rebuilt(static_cast<std::size_t>(n), 0.0);
        for (const Tagged& t : all) {
            const double c = basis.coefficient(*t.h, f);
            sum += c * c;
            for (std::int32_t x : d.cube(t.cube).members)
                rebuilt[static_cast<std::size_t>(x)] += c * basis.value(*t.h, x);
        }
        for (int root : d.roots()) {
            if (basis.cube_mass(root) <= 0.0) continue;
            const double avg = basis.average(root, f);
            sum += basis.cube_mass(root) * avg * avg;
            for (std::int32_t x : d.cube(root).members)
                rebuilt[static_cast<std::size_t>(x)] += avg;
        }
        if (norm2 > 0.0) parseval = std::max(parseval, std::abs(sum - norm2) / norm2);
        std::vector<double> diff(static_cast<std::size_t>(n));
        for (int x = 0; x < n; ++x)
            diff[static_cast<std::size_t>(x)] =
                f[static_cast<std::size_t>(x)] - rebuilt[static_cast<std::size_t>(x)];
        if (norm2 > 0.0) recon = std::max(recon, basis.norm(diff) / std::sqrt(norm2));
    }
    add(out, "haar.parseval", parseval, 1e-10);
    add(out, "haar.reconstruction", recon, 1e-10);

    double scaling = 1.0;
    for (const Tagged& t : all) {
        const double mass = basis.cube_mass(t.cube);
        if (mass <= 0.0) continue;
        for (double p : {1.0, 2.0}) {
            const double ratio = basis.lp_norm(*t.h, p) / std::pow(mass, 1.0 / p - 0.5);
            scaling = std::max(scaling, std::max(ratio, 1.0 / ratio));
        }
        const double rinf =
            basis.lp_norm(*t.h, std::numeric_limits<double>::infinity()) * std::sqrt(mass);
        scaling = std::max(scaling, std::max(rinf, 1.0 / rinf));
    }
    add(out, "haar.norm_scaling_C", scaling, 0.0, false);
}

// --- operators ---------------------------------------------------------------

void check_operators(const Context& ctx, std::vector<CheckResult>& out) {
    const Eigen::MatrixXd& e = ctx.m.entries();
    const int n = static_cast<int>(e.rows());

    double diag = 0.0;
    for (int i = 0; i < n; ++i) diag = std::max(diag, std::abs(e(i, i)));
    add(out, "operators.zero_diagonal", diag, 0.0);

    if (ctx.sc.kernel_kind == "hilbert1d" || ctx.sc.kernel_kind == "riesz") {
        double anti = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) anti = std::max(anti, std::abs(e(i, j) + e(j, i)));
        add(out, "operators.antisymmetry", anti, 0.0);
    }

    const KernelValidation kv = ctx.m.validate_bounds();
    add(out, "operators.size_finite", std::isfinite(kv.size_constant) ? 0.0 : 1.0, 0.0);
    add(out, "operators.size_constant", kv.size_constant, 0.0, false);
    add(out, "operators.smoothness_constant", kv.smoothness_constant, 0.0, false);
    if (ctx.sc.kernel_kind == "hilbert1d" && ctx.sc.space_type == "grid1d" &&
        ctx.sc.base == "lebesgue") {
        add(out, "operators.hilbert_size_low", 1.5 - kv.size_constant, 0.0);
        add(out, "operators.hilbert_size_high", kv.size_constant - 2.5, 0.0);
    }
}

// --- constants ---------------------------------------------------------------

void check_constants(const Context& ctx, std::vector<CheckResult>& out) {
    std::vector<const DyadicSystem*> ptrs;
    for (const DyadicSystem& g : ctx.grids) ptrs.push_back(&g);
    const ConstantsReport rep = compute_constants(ptrs, ctx.m, ctx.u, ctx.v, ctx.sc.params);

    add(out, "constants.testing_necessity",
        std::max(rep.testing, rep.testing_dual) - rep.norm, 1e-9);

    const OperatorMatrix mt = OperatorMatrix::from_entries(
        ctx.space, Eigen::MatrixXd(ctx.m.entries().transpose()));
    const ConstantsReport swp = compute_constants(ptrs, mt, ctx.v, ctx.u, ctx.sc.params);
    const auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
    };
    double dual = 0.0;
    dual = std::max(dual, rel(swp.a2, rep.a2_dual));
    dual = std::max(dual, rel(swp.a2_dual, rep.a2));
    dual = std::max(dual, rel(swp.testing, rep.testing_dual));
    dual = std::max(dual, rel(swp.testing_dual, rep.testing));
    dual = std::max(dual, rel(swp.pivotal, rep.pivotal_dual));
    dual = std::max(dual, rel(swp.pivotal_dual, rep.pivotal));
    dual = std::max(dual, rel(swp.norm, rep.norm));
    add(out, "constants.duality_swap", dual, 1e-10);

    const double s = 0.5, t = 2.0;
    Measure su, tv;
    su.atoms = ctx.u.atoms;
    tv.atoms = ctx.v.atoms;
    for (double& x : su.atoms) x *= s;
    for (double& x : tv.atoms) x *= t;
    const ConstantsReport scl = compute_constants(ptrs, ctx.m, su, tv, ctx.sc.params);
    const double factor = std::sqrt(s * t);
    double cov = 0.0;
    cov = std::max(cov, rel(scl.a2, factor * rep.a2));
    cov = std::max(cov, rel(scl.testing, factor * rep.testing));
    cov = std::max(cov, rel(scl.pivotal, factor * rep.pivotal));
    cov = std::max(cov, rel(scl.norm, factor * rep.norm));
    add(out, "constants.scaling_covariance", cov, 1e-12);

    // Carleson sandwich over a_Q = Phi(Q, 1_X u)
    const DyadicSystem& d = ctx.du();
    std::vector<std::int32_t> everything(static_cast<std::size_t>(ctx.space.size()));
    for (int i = 0; i < ctx.space.size(); ++i) everything[static_cast<std::size_t>(i)] = i;
    std::vector<double> a(static_cast<std::size_t>(d.num_cubes()));
    for (int id = 0; id < d.num_cubes(); ++id)
        a[static_cast<std::size_t>(id)] =
            pivotal_phi(d, id, everything, ctx.u, ctx.v, ctx.sc.params);
    const CarlesonBounds cb = carleson_embedding(d, ctx.u, a);
    add(out, "constants.carleson_lower", cb.c_carleson - cb.c_embed,
        1e-9 * std::max(1.0, cb.c_carleson));
    add(out, "constants.carleson_upper", cb.c_embed - 4.0 * cb.c_carleson,
        1e-9 * std::max(1.0, cb.c_carleson));

    // Poisson identity on an interior-supported weight (1D Lebesgue only)
    if (ctx.sc.space_type == "grid1d" && ctx.sc.base == "lebesgue") {
        const Space& sp = ctx.space;
        std::vector<double> atoms(static_cast<std::size_t>(sp.size()), 0.0);
        const double lo = ctx.sc.lo, span = ctx.sc.hi - ctx.sc.lo;
        for (int i = 0; i < sp.size(); ++i) {
            const double x = (sp.coord(i, 0) - lo) / span;
            if (x >= 0.4 && x <= 0.6) atoms[static_cast<std::size_t>(i)] = 1.0 + 0.01 * i;
        }
        const Measure w{atoms};
        double worst = 0.0;
        int checked = 0;
        for (int k : sorted_levels(d)) {
            if (k < 3 || k > 7) continue;
            for (int id : d.level_cubes(k)) {
                const Cube& q = d.cube(id);
                const double a_rel = (q.min_coord - lo) / span;
                const double b_rel = (q.max_coord - lo) / span;
                if (a_rel < 0.42 || b_rel > 0.58) continue;
                const double kq = poisson_K(d, id, w, 1.0);
                const double pq = classical_poisson_1d(d, id, w);
                if (pq > 0.0) worst = std::max(worst, std::abs(kq - 0.5 * pq) / (0.5 * pq));
                ++checked;
            }
        }
        if (checked > 0) add(out, "constants.poisson_half_identity", worst, 1e-9);
    }
}

// --- corona ------------------------------------------------------------------

void check_corona(const Context& ctx, std::vector<CheckResult>& out) {
    std::vector<const DyadicSystem*> ptrs;
    for (const DyadicSystem& g : ctx.grids) ptrs.push_back(&g);
    const ConstantsReport rep = compute_constants(ptrs, ctx.m, ctx.u, ctx.v, ctx.sc.params);
    const double pooled = std::max(rep.pivotal, rep.pivotal_dual);
    const double piv = pooled > 0.0 ? pooled : 1.0;

    const DyadicSystem& d = ctx.du();
    const StoppingForest forest = build_stopping_cubes(d, ctx.u, ctx.v, piv, ctx.sc.params);
    const Corona corona = build_coronas(forest, d, ctx.dv(), ctx.sc.r);
    const CoronaVerification mass = verify_corona_carleson(
        forest, corona, ctx.m, ctx.u, ctx.v, CoronaMode::stopping_mass, ctx.sc.params);

    add(out, "corona.quarter_mass", mass.constant, 0.25 + 1e-12);
    add(out, "corona.generation_decay", mass.details.at("generation_excess"), 1.0 + 1e-12);

    double partition_bad = 0.0;
    std::vector<int> seen(static_cast<std::size_t>(d.num_cubes()), 0);
    for (const auto& [sp, cubes] : corona.c_u)
        for (std::int32_t id : cubes) ++seen[static_cast<std::size_t>(id)];
    for (int c : seen)
        if (c != 1) partition_bad += 1.0;
    add(out, "corona.partition", partition_bad, 0.0);

    const HaarBasis basis = HaarBasis::build(d, ctx.u);
    double proj_ratio = 0.0;
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
        const std::vector<double> f = random_f(ctx, 100 + trial);
        const double norm2 = basis.inner(f, f);
        if (norm2 <= 0.0) continue;
        double sum = 0.0;
        for (std::int32_t sp : forest.members) {
            const std::vector<double> pf = corona_project(f, sp, corona, basis);
            sum += basis.inner(pf, pf);
        }
        proj_ratio = std::max(proj_ratio, sum / norm2);
    }
    add(out, "corona.projection_bound", proj_ratio,
        static_cast<double>(basis.max_effective_children()) * (1.0 + 1e-12));
}

// --- harness -----------------------------------------------------------------

void check_harness(const Context& ctx, std::vector<CheckResult>& out) {
    const RunReport a = run_scenario(ctx.sc);
    const RunReport b = run_scenario(ctx.sc);
    add(out, "harness.determinism", a.to_json() == b.to_json() ? 0.0 : 1.0, 0.0);

    const EnsembleSummary one = run_ensemble(ctx.sc, 1);
    add(out, "harness.single_trial",
        one.rows.size() == 1 && one.rows[0].ratio == a.constants.ratio ? 0.0 : 1.0, 0.0);

    const EnsembleSummary ens = run_ensemble(ctx.sc, 4);
    const bool ordered = ens.ratio_min <= ens.ratio_p25 && ens.ratio_p25 <= ens.ratio_median &&
                         ens.ratio_median <= ens.ratio_p75 && ens.ratio_p75 <= ens.ratio_p95 &&
                         ens.ratio_p95 <= ens.ratio_max;
    add(out, "harness.quantile_order", ordered ? 0.0 : 1.0, 0.0);
    add(out, "harness.ensemble_finite", ens.all_finite ? 0.0 : 1.0, 0.0);
}

}  // namespace

bool VerifyReport::passed() const {
    for (const CheckResult& c : checks)
        if (c.hard && !c.passed) return false;
    return true;
}

std::string VerifyReport::table() const {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-36s %14s %14s  %s\n", "check", "value", "bound",
                  "status");
    out << line;
    for (const CheckResult& c : checks) {
        if (c.hard)
            std::snprintf(line, sizeof line, "%-36s %14.6g %14.6g  %s\n", c.name.c_str(),
                          c.value, c.bound, c.passed ? "PASS" : "FAIL");
        else
            std::snprintf(line, sizeof line, "%-36s %14.6g %14s  %s\n", c.name.c_str(), c.value,
                          "-", "info");
        out << line;
    }
    out << (passed() ? "ALL CHECKS PASSED\n" : "CHECK FAILURES PRESENT\n");
    return out.str();
}

std::string VerifyReport::to_json() const {
    json arr = json::array();
    for (const CheckResult& c : checks)
        arr.push_back({{"name", c.name},
                       {"value", c.value},
                       {"bound", c.bound},
                       {"hard", c.hard},
                       {"passed", c.passed}});
    const json j{{"module", module}, {"checks", std::move(arr)}, {"passed", passed()}};
    return j.dump(2) + "\n";
}

VerifyReport run_verify(const Scenario& sc, const std::string& module) {
    static const std::vector<std::string> known{"space",     "dyadic", "haar",    "operators",
                                                "constants", "corona", "harness", "all"};
    if (std::find(known.begin(), known.end(), module) == known.end())
        throw ConfigError("verify: unknown module: " + module);

    sc.validate();
    const Context ctx(sc);
    VerifyReport rep;
    rep.module = module;
    const bool all = module == "all";
    if (all || module == "space") check_space(ctx, rep.checks);
    if (all || module == "dyadic") check_dyadic(ctx, rep.checks);
    if (all || module == "haar") check_haar(ctx, rep.checks);
    if (all || module == "operators") check_operators(ctx, rep.checks);
    if (all || module == "constants") check_constants(ctx, rep.checks);
    if (all || module == "corona") check_corona(ctx, rep.checks);
    if (all || module == "harness") check_harness(ctx, rep.checks);
    return rep;
}

}  // namespace hartlab
