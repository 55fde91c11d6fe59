#include <cmath>
#include <vector>

#include "doctest.h"
#include "hartlab/haar.hpp"
#include "hartlab/rng.hpp"

using namespace hartlab;

namespace {

constexpr double TOL = 1e-10;

DyadicParams shifted_params() {
    DyadicParams p;
    p.mode = DyadicMode::shifted1d;
    return p;
}

Measure random_weight(int n, Rng& rng, double sigma = 0.7) {
    std::vector<double> atoms(n);
    for (auto& a : atoms) a = std::exp(sigma * rng.normal());
    return Measure{std::move(atoms)};
}

std::vector<double> random_f(int n, Rng& rng) {
    std::vector<double> f(n);
    for (auto& x : f) x = rng.normal();
    return f;
}

/// Dense point vector of one Haar function.
std::vector<double> expand(const HaarBasis& basis, const HaarFunction& h) {
    std::vector<double> v(basis.system().space().size(), 0.0);
    for (auto p : basis.system().cube(h.cube).members) v[p] = basis.value(h, p);
    return v;
}

/// Brute-force orthonormality of the full family, including the root averages.
void check_orthonormal(const HaarBasis& basis) {
    std::vector<std::vector<double>> family;
    for (int id = 0; id < basis.system().num_cubes(); ++id)
        for (const auto& h : basis.functions(id)) family.push_back(expand(basis, h));
    for (auto root : basis.system().roots()) {
        if (basis.cube_mass(root) <= 0.0) continue;
        std::vector<double> v(basis.system().space().size(), 0.0);
        for (auto p : basis.system().cube(root).members)
            v[p] = 1.0 / std::sqrt(basis.cube_mass(root));
        family.push_back(std::move(v));
    }
    for (std::size_t a = 0; a < family.size(); ++a)
        for (std::size_t b = a; b < family.size(); ++b) {
            const double g = basis.inner(family[a], family[b]);
            CHECK(std::abs(g - (a == b ? 1.0 : 0.0)) < TOL);
        }
}

void check_parseval_and_reconstruction(const HaarBasis& basis, const std::vector<double>& f) {
    double sum = 0.0;
    for (int id = 0; id < basis.system().num_cubes(); ++id)
        for (const auto& h : basis.functions(id)) {
            const double c = basis.coefficient(h, f);
            sum += c * c;
        }
    for (auto root : basis.system().roots()) {
        if (basis.cube_mass(root) <= 0.0) continue;
        double integral = 0.0;
        for (auto p : basis.system().cube(root).members)
            integral += basis.weight().atoms[p] * f[p];
        sum += integral * integral / basis.cube_mass(root);
    }
    const double n2 = basis.inner(f, f);
    CHECK(std::abs(sum - n2) < TOL * std::max(1.0, n2));

    // Telescoping reconstruction over the full level window.
    std::vector<double> rec = basis.level_expectation(basis.system().k_min(), f);
    for (int k = basis.system().k_min(); k < basis.system().k_max(); ++k) {
        const auto d = basis.level_difference(k, f);
        for (std::size_t i = 0; i < rec.size(); ++i) rec[i] += d[i];
    }
    double err = 0.0;
    std::vector<double> diff(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) diff[i] = f[i] - rec[i];
    err = basis.norm(diff);
    CHECK(err < TOL * std::max(1.0, basis.norm(f)));
}

}  // namespace

TEST_CASE("two-child cube reproduces the hand-computed Haar values") {
    const Space s = Space::grid1d(2, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    const DyadicSystem d = DyadicSystem::build(s, shifted_params(), 0);
    const HaarBasis basis = HaarBasis::build(d, Measure{{1.0, 3.0}});
    const int root = d.roots().front();
    REQUIRE(basis.num_functions(root) == 1);
    const auto& h = basis.functions(root).front();
    CHECK(h.child_values[0] == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
    CHECK(h.child_values[1] == doctest::Approx(-0.5 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(h.child_values[0] == doctest::Approx(0.8660).epsilon(1e-4));
    CHECK(h.child_values[1] == doctest::Approx(-0.2887).epsilon(1e-4));
    // Mean zero and unit norm under the weight.
    CHECK(std::abs(1.0 * h.child_values[0] + 3.0 * h.child_values[1]) < 1e-15);
    CHECK(basis.lp_norm(h, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("random line basis is orthonormal, complete, and counts children") {
    Rng rng(42);
    const Space s = Space::grid1d(64, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    const DyadicSystem d = DyadicSystem::build(s, shifted_params(), 0xabcdef12u);
    const HaarBasis basis = HaarBasis::build(d, random_weight(64, rng));
    for (int id = 0; id < d.num_cubes(); ++id) {
        const int expected =
            basis.cube_mass(id) > 0.0 ? std::max(0, basis.effective_children(id) - 1) : 0;
        CHECK(basis.num_functions(id) == expected);
    }
    check_orthonormal(basis);
    check_parseval_and_reconstruction(basis, random_f(64, rng));
}

TEST_CASE("generic-mode tree basis is orthonormal and complete") {
    Rng rng(7);
    const Space t = Space::tree(32);
    DyadicParams p;
    p.mode = DyadicMode::generic;
    p.delta = 1.0 / 16.0;
    const DyadicSystem d = DyadicSystem::build(t, p, 99);
    const HaarBasis basis = HaarBasis::build(d, random_weight(32, rng));
    check_orthonormal(basis);
    check_parseval_and_reconstruction(basis, random_f(32, rng));
    CHECK(basis.max_effective_children() >= 2);
}

TEST_CASE("null-weight children are dropped from the count") {
    const Space s = Space::grid1d(4, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    const DyadicSystem d = DyadicSystem::build(s, shifted_params(), 0);
    const HaarBasis basis = HaarBasis::build(d, Measure{{1.0, 1.0, 0.0, 0.0}});
    const int root = d.roots().front();
    CHECK(basis.num_functions(root) == 0);  // only the left half carries mass
    const int left = d.cube_of(1, 0);
    CHECK(basis.num_functions(left) == 1);
    const int right = d.cube_of(1, 2);
    CHECK(basis.num_functions(right) == 0);
    CHECK_THROWS_AS((void)basis.average(right, {1.0, 1.0, 1.0, 1.0}), ConfigError);
}

TEST_CASE("tagged expectation identity holds on a short level window") {
    Rng rng(5);
    const Space s = Space::grid1d(16, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    const DyadicSystem d = DyadicSystem::build(s, shifted_params(), 0);
    const HaarBasis basis = HaarBasis::build(d, random_weight(16, rng));
    std::vector<double> f = random_f(16, rng);
    // Zero out the root average so the telescoping starts from nothing.
    const int root = d.roots().front();
    const double fbar = basis.average(root, f);
    for (auto& x : f) x -= fbar;

    const int R = d.cube_of(3, 5);
    REQUIRE(basis.num_functions(R) == 1);
    const auto& eta = basis.functions(R).front();
    std::vector<double> lhs(16, 0.0);
    for (int q = d.cube_of(0, 5); q != R;) {
        const auto delta = basis.haar_project(q, f);
        for (auto p : d.cube(R).members) lhs[p] += delta[p] * basis.value(eta, p);
        // descend along the ancestor chain toward R
        int next = -1;
        for (auto c : d.cube(q).children)
            if (d.contains(c, R)) next = c;
        REQUIRE(next >= 0);
        q = next;
    }
    const double eRf = basis.average(R, f);
    for (auto p : d.cube(R).members)
        CHECK(std::abs(lhs[p] - eRf * basis.value(eta, p)) < 1e-12);
}

namespace {

double norm_scaling_constant(const HaarBasis& basis) {
    double C = 1.0;
    const double inf = std::numeric_limits<double>::infinity();
    for (int id = 0; id < basis.system().num_cubes(); ++id)
        for (const auto& h : basis.functions(id)) {
            for (double p : {1.0, 2.0, inf}) {
                const double scale = std::pow(basis.cube_mass(id), 1.0 / p - 0.5);
                const double ratio = basis.lp_norm(h, p) / scale;
                C = std::max({C, ratio, 1.0 / ratio});
            }
        }
    return C;
}

}  // namespace

TEST_CASE("norm scaling constant stays small on the Lebesgue line") {
    const Space s = Space::grid1d(128, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    // Unshifted grid: every split is into equal-mass halves, so every ratio is 1.
    const DyadicSystem d0 = DyadicSystem::build(s, shifted_params(), 0);
    const HaarBasis balanced = HaarBasis::build(d0, Measure{s.mu().atoms});
    CHECK(norm_scaling_constant(balanced) == doctest::Approx(1.0).epsilon(1e-12));
    // A shifted grid clips cubes at the domain edges; the imbalance stays moderate.
    const DyadicSystem d1 = DyadicSystem::build(s, shifted_params(), 4242);
    const HaarBasis shifted = HaarBasis::build(d1, Measure{s.mu().atoms});
    const double C = norm_scaling_constant(shifted);
    CHECK(C >= 1.0);
    CHECK(C <= 4.0);
}

TEST_CASE("good/bad splitting is orthogonal and vanishes at large rank") {
    Rng rng(11);
    const Space s = Space::grid1d(128, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    const DyadicSystem d = DyadicSystem::build(s, shifted_params(), 555);
    const DyadicSystem other = DyadicSystem::build(s, shifted_params(), 777);
    const HaarBasis basis = HaarBasis::build(d, random_weight(128, rng));
    const std::vector<double> f = random_f(128, rng);
    const auto [good, bad] = basis.split_good_bad(f, other, 2, 0.2);
    const double n2 = basis.inner(f, f);
    CHECK(std::abs(basis.inner(good, good) + basis.inner(bad, bad) - n2) < TOL * n2);
    CHECK(basis.norm(bad) > 0.0);

    const auto [g2, b2] = basis.split_good_bad(f, other, 50, 0.2);
    CHECK(basis.norm(b2) == 0.0);
}
