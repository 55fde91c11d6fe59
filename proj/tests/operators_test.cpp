#include <cmath>
#include <vector>

#include "doctest.h"
#include "hartlab/operators.hpp"
#include "hartlab/rng.hpp"

using namespace hartlab;

namespace {

Space two_points() {
    return Space::from_points({{0.25}, {0.75}}, {0.5, 0.5}, 1.0);
}

}  // namespace

TEST_CASE("hilbert kernel on two points matches the explicit values") {
    const Space s = two_points();
    Kernel k;
    k.kind = KernelKind::hilbert1d;
    const OperatorMatrix m = OperatorMatrix::assemble(s, k);
    CHECK(m.entries()(0, 1) == -2.0);
    CHECK(m.entries()(1, 0) == 2.0);
    CHECK(m.entries()(0, 0) == 0.0);
    CHECK(m.entries()(1, 1) == 0.0);

    // (T(fu))(x_1) = K(x_1,x_2) f_2 u_2 = -2*1*4.
    const auto out = m.apply_forward({0.0, 1.0}, Measure{{1.0, 4.0}});
    CHECK(out[0] == -8.0);
    CHECK(out[1] == 0.0);
    CHECK(m.apply_forward({0.0, 0.0}, Measure{{1.0, 4.0}}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("hilbert size constant on the Lebesgue line is near 2") {
    const Space s = Space::grid1d(256, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    Kernel k;
    k.kind = KernelKind::hilbert1d;
    const OperatorMatrix m = OperatorMatrix::assemble(s, k);
    const auto report = m.validate_bounds();
    CHECK(report.pairs_checked == 256 * 255);
    CHECK(report.size_constant > 1.5);
    CHECK(report.size_constant < 2.5);
    // Holder quotient with kappa=1: 2 d(x,y)/d(x',y) <= 4 for admissible triples.
    CHECK(report.smoothness_constant > 1.0);
    CHECK(report.smoothness_constant <= 4.0 + 1e-9);
}

TEST_CASE("validation sweep agrees with a brute-force oracle on a small grid") {
    const Space s = Space::grid1d(24, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    Kernel k;
    k.kind = KernelKind::hilbert1d;
    k.kappa = 0.7;
    const OperatorMatrix m = OperatorMatrix::assemble(s, k);
    const auto report = m.validate_bounds();

    double size = 0.0, smooth = 0.0;
    for (int i = 0; i < 24; ++i)
        for (int j = 0; j < 24; ++j) {
            if (i == j) continue;
            size = std::max(size, std::abs(m.entries()(i, j)) * s.volume_V(i, j));
            for (int ip = 0; ip < 24; ++ip) {
                if (ip == i || ip == j) continue;
                if (s.dist(i, ip) > 0.5 * s.dist(i, j)) continue;
                const double q = std::abs(m.entries()(i, j) - m.entries()(ip, j)) *
                                 s.volume_V(i, j) * std::pow(s.dist(i, j) / s.dist(i, ip), 0.7);
                smooth = std::max(smooth, q);
            }
        }
    CHECK(report.size_constant == size);
    CHECK(report.smoothness_constant == smooth);
}

TEST_CASE("riesz kernel is antisymmetric and reduces to hilbert in 1D") {
    const Space plane = Space::grid2d(64, 0.0, 1.0);
    Kernel k;
    k.kind = KernelKind::riesz;
    k.d_exp = 2.0;
    for (int comp : {0, 1}) {
        k.component = comp;
        const OperatorMatrix m = OperatorMatrix::assemble(plane, k);
        for (int i = 0; i < plane.size(); ++i)
            for (int j = 0; j < plane.size(); ++j)
                CHECK(m.entries()(i, j) == -m.entries()(j, i));
    }
    k.component = 2;
    CHECK_THROWS_AS(OperatorMatrix::assemble(plane, k), ConfigError);

    const Space line = Space::grid1d(32, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    Kernel r1;
    r1.kind = KernelKind::riesz;
    r1.d_exp = 1.0;
    Kernel h;
    h.kind = KernelKind::hilbert1d;
    const OperatorMatrix mr = OperatorMatrix::assemble(line, r1);
    const OperatorMatrix mh = OperatorMatrix::assemble(line, h);
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
            CHECK(mr.entries()(i, j) == doctest::Approx(mh.entries()(i, j)).epsilon(1e-13));
}

TEST_CASE("power kernel alternates sign and stays Holder-regular") {
    const Space s = Space::grid1d(64, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    Kernel k;
    k.kind = KernelKind::power;
    const OperatorMatrix m = OperatorMatrix::assemble(s, k);
    // Adjacent points: strict ball of radius h holds only the center, V = h.
    CHECK(m.entries()(0, 1) == doctest::Approx(-64.0).epsilon(1e-13));
    CHECK(m.entries()(1, 2) == doctest::Approx(-64.0).epsilon(1e-13));
    CHECK(m.entries()(0, 2) ==
          doctest::Approx(1.0 / s.volume_V(0, 2)).epsilon(1e-13));
    const auto report = m.validate_bounds();
    CHECK(report.size_constant == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report.smoothness_constant > 0.0);
    CHECK(report.smoothness_constant < 10.0);
}

TEST_CASE("adjoint identity holds to near machine precision") {
    Rng rng(314);
    const Space s = Space::grid1d(64, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    Kernel k;
    k.kind = KernelKind::hilbert1d;
    const OperatorMatrix m = OperatorMatrix::assemble(s, k);
    std::vector<double> f(64), g(64), ua(64), va(64);
    for (int i = 0; i < 64; ++i) {
        f[i] = rng.normal();
        g[i] = rng.normal();
        ua[i] = std::exp(rng.normal());
        va[i] = std::exp(rng.normal());
    }
    const Measure u{ua}, v{va};
    const auto tf = m.apply_forward(f, u);
    const auto tg = m.apply_adjoint(g, v);
    double lhs = 0.0, rhs = 0.0, scale = 0.0;
    for (int i = 0; i < 64; ++i) {
        lhs += tf[i] * g[i] * va[i];
        rhs += f[i] * tg[i] * ua[i];
        scale += std::abs(tf[i] * g[i] * va[i]);
    }
    CHECK(std::abs(lhs - rhs) < 1e-12 * scale);
}

TEST_CASE("kernel and entry validation reject bad configurations") {
    const Space plane = Space::grid2d(16, 0.0, 1.0);
    Kernel h;
    h.kind = KernelKind::hilbert1d;
    CHECK_THROWS_AS(OperatorMatrix::assemble(plane, h), ConfigError);

    const Space line = Space::grid1d(4, 0.0, 1.0, BaseKind::lebesgue, 0.0);
    Kernel bad;
    bad.kappa = 0.0;
    CHECK_THROWS_AS(OperatorMatrix::assemble(line, bad), ConfigError);
    bad.kappa = 1.5;
    CHECK_THROWS_AS(OperatorMatrix::assemble(line, bad), ConfigError);

    Eigen::MatrixXd e = Eigen::MatrixXd::Ones(4, 4);
    CHECK_THROWS_AS(OperatorMatrix::from_entries(line, e), ConfigError);
    CHECK_THROWS_AS(OperatorMatrix::from_entries(line, Eigen::MatrixXd::Zero(3, 3)), ConfigError);

    Kernel z;
    z.kind = KernelKind::zero;
    const OperatorMatrix m = OperatorMatrix::assemble(line, z);
    CHECK(m.entries().isZero(0.0));
    CHECK(m.validate_bounds().size_constant == 0.0);
}
