#include <cmath>
#include <vector>

#include "doctest.h"
#include "hartlab/space.hpp"

using namespace hartlab;

namespace {

/// Independent oracle: sum w over the strict ball by scanning every point.
double ball_oracle(const Space& s, int x, double r, const Measure& w) {
    double acc = 0.0;
    for (int y = 0; y < s.size(); ++y)
        if (s.dist(x, y) < r) acc += w.atoms[y];
    return acc;
}

int point_at(const Space& s, double coord) {
    for (int i = 0; i < s.size(); ++i)
        if (std::abs(s.coord(i, 0) - coord) < 1e-12) return i;
    REQUIRE(false);
    return -1;
}

}  // namespace

TEST_CASE("grid1d ball measure uses the strict inequality") {
    const Space s = Space::grid1d(256, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    const int x = point_at(s, 0.5);

    const double got = s.ball_measure(x, 0.25, s.mu());
    CHECK(got == doctest::Approx(ball_oracle(s, x, 0.25, s.mu())).epsilon(1e-15));
    // Points at i/256; {|y - 0.5| < 0.25} = {i : 65 <= i <= 191}, 127 points.
    CHECK(got == doctest::Approx(127.0 / 256.0).epsilon(1e-15));

    CHECK(s.ball_measure(x, 0.0, s.mu()) == 0.0);
    CHECK(s.count_within(x, 3.0 / 256.0) == 5);  // radius hits a distance exactly: excluded
    CHECK(s.resolution() == doctest::Approx(1.0 / 256.0));
    CHECK(s.diameter() == doctest::Approx(255.0 / 256.0));
}

TEST_CASE("neighbor index is sorted and complete") {
    const Space s = Space::grid2d(64, 0.0, 1.0);
    for (int x = 0; x < s.size(); x += 7) {
        const auto& nd = s.neighbor_dists(x);
        REQUIRE(static_cast<int>(nd.size()) == s.size());
        CHECK(nd.front() == 0.0);
        CHECK(s.neighbors(x).front() == x);
        for (std::size_t k = 1; k < nd.size(); ++k) CHECK(nd[k] >= nd[k - 1]);
    }
}

TEST_CASE("volume_V matches the direct-sum oracle on a Lebesgue line") {
    // Interval of radius 0.5 interior to a length-2 ambient grid.
    const Space s = Space::grid1d(512, -0.5, 1.5, BaseKind::lebesgue, 0.0);
    const int x = point_at(s, 0.25);
    const int y = point_at(s, 0.75);
    const double v = s.volume_V(x, y);
    CHECK(v == doctest::Approx(ball_oracle(s, x, 0.5, s.mu())).epsilon(1e-15));
    CHECK(v == doctest::Approx(1.0).epsilon(0.01));
    CHECK_THROWS_AS((void)s.volume_V(x, x), ConfigError);
}

TEST_CASE("volume_V on the Bessel line approaches the quadrature value") {
    // Points at i/256 for i = 1..1024; atoms t^2 * h for lambda = 1.
    const double h = 1.0 / 256.0;
    const Space s = Space::grid1d(1024, h, 4.0 + h, BaseKind::bessel, 1.0);
    const int x = point_at(s, 1.0);
    const int y = point_at(s, 2.0);
    const double v = s.volume_V(x, y);
    CHECK(v == doctest::Approx(ball_oracle(s, x, 1.0, s.mu())).epsilon(1e-15));

    // Quadrature oracle at double resolution; integral of t^2 over (0,2) is 8/3.
    const double h2 = 1.0 / 512.0;
    const Space s2 = Space::grid1d(2048, h2, 4.0 + h2, BaseKind::bessel, 1.0);
    const double v2 = s2.volume_V(point_at(s2, 1.0), point_at(s2, 2.0));
    CHECK(std::abs(v - v2) < 0.02);
    CHECK(v2 == doctest::Approx(8.0 / 3.0).epsilon(0.01));
}

TEST_CASE("volume_V is symmetric within the doubling factor") {
    const Space s = Space::grid1d(256, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    const auto [c_mu, n_est] = s.estimate_doubling(20.0 / 256.0, 0.12);
    for (int x = 10; x < 200; x += 17) {
        const int y = x + 40;
        const double r = s.volume_V(x, y) / s.volume_V(y, x);
        CHECK(r <= c_mu * c_mu);
        CHECK(r >= 1.0 / (c_mu * c_mu));
    }
    CHECK(std::abs(c_mu - 2.0) <= 0.1);
    CHECK(n_est == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("doubling estimates recover the upper dimension") {
    const Space g2 = Space::grid2d(2304, 0.0, 1.0);  // 48 x 48
    const auto [c2, n2] = g2.estimate_doubling(3.0 / 48.0, 4.0 / 48.0, 2);
    CHECK(std::isfinite(c2));
    CHECK(n2 == doctest::Approx(2.0).epsilon(0.15));

    const Space t = Space::tree(256);
    const auto [ct, nt] = t.estimate_doubling(1.0 / 64.0, 0.25);
    CHECK(ct == doctest::Approx(2.0).epsilon(0.01));
    CHECK(nt == doctest::Approx(1.0).epsilon(0.2));

    const Space single = Space::from_points({{0.0}}, {1.0}, 1.0);
    const auto [c1, n1] = single.estimate_doubling(0.5, 1.0);
    CHECK(c1 == 1.0);
    CHECK(n1 == 0.0);
}

TEST_CASE("tree metric is the ultrametric of nearest common ancestors") {
    const Space t = Space::tree(8);
    CHECK(t.dist(0, 1) == 0.25);  // ancestor at depth 2
    CHECK(t.dist(0, 4) == 1.0);   // root
    CHECK(t.dist(2, 3) == 0.25);
    CHECK(t.dist(1, 2) == 0.5);
    CHECK(t.dist(5, 5) == 0.0);
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b)
            for (int c = 0; c < 8; ++c)
                CHECK(t.dist(a, c) <= t.a0() * (t.dist(a, b) + t.dist(b, c)));
}

TEST_CASE("closed-form base ball agrees with the atomic sum at matched scales") {
    const Space s = Space::grid1d(256, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    REQUIRE(s.has_mu_profile());
    const int x = point_at(s, 0.5);
    CHECK(s.mu_ball(x, 0.25) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(s.mu_ball(x, 0.25) - s.mu_ball_discrete(x, 0.25)) <= 2.0 / 256.0);
    CHECK(s.mu_ball(x, 0.0) == 0.0);
    // Clipped at the domain edge.
    CHECK(s.mu_ball(0, 0.25) == doctest::Approx(0.25 + 0.5 / 256.0).epsilon(1e-12));
}

TEST_CASE("space construction rejects invalid descriptors") {
    CHECK_THROWS_AS(Space::grid2d(50, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(Space::tree(48), ConfigError);
    CHECK_THROWS_AS(Space::grid1d(16, 0.0, 1.0, BaseKind::lebesgue, 0.0, 0.5), ConfigError);
    CHECK_THROWS_AS(Space::grid1d(16, 1.0, 0.0, BaseKind::lebesgue, 0.0), ConfigError);
    CHECK_THROWS_AS(Space::from_points({{0.0}, {1.0}}, {1.0, 0.0}, 1.0), ConfigError);
    CHECK_THROWS_AS(Space::grid1d(0, 0.0, 1.0, BaseKind::lebesgue, 0.0), ConfigError);
    const Space s = Space::grid1d(8, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    CHECK_THROWS_AS(s.estimate_doubling(0.0, 1.0), ConfigError);
}
