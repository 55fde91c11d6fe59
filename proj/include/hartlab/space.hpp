#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hartlab/errors.hpp"

namespace hartlab {

// Nonnegative atomic weight on the points of a Space.  Atoms may vanish;
// the base measure of a Space must be strictly positive everywhere.
struct Measure {
    std::vector<double> atoms;

    double total() const;
    double mass_of(const std::vector<std::int32_t>& ids) const;
    static Measure validated(std::vector<double> atoms, bool strictly_positive);
};

enum class MetricKind { euclidean, tree };
enum class BaseKind { lebesgue, bessel, custom };

// Finite model of a space of homogeneous type (X, d, mu): points with a
// quasi-metric of constant a0 and a strictly positive base measure.
// Balls use the strict inequality d(x,y) < r throughout.
class Space {
public:
    static Space grid1d(int n_points, double lo, double hi, BaseKind base, double lambda,
                        double a0 = 1.0);
    static Space grid2d(int n_points, double lo, double hi, double a0 = 1.0);
    // Balanced binary tree with n_leaves = 2^depth leaves; d(x,y) = 2^{-lca depth}.
    static Space tree(int n_leaves);
    static Space from_points(std::vector<std::vector<double>> coords, std::vector<double> atoms,
                             double a0);

    int size() const { return n_; }
    int dim() const { return dim_; }
    double a0() const { return a0_; }
    MetricKind metric() const { return metric_; }
    BaseKind base_kind() const { return base_; }
    double bessel_lambda() const { return lambda_; }
    const Measure& mu() const { return mu_; }
    double coord(int i, int k) const { return coords_[static_cast<std::size_t>(i) * dim_ + k]; }

    double dist(int i, int j) const;
    double diameter() const { return diameter_; }
    double resolution() const { return resolution_; }  // min positive pairwise distance

    // Number of points with d(x,y) < r.
    int count_within(int x, double r) const;
    // Sum of w-atoms over the strict ball {y : d(x,y) < r}.
    double ball_measure(int x, double r, const Measure& w) const;
    // Base-measure ball.  grid1d carries the closed-form profile of its ambient
    // density (Lebesgue/Bessel); every other space falls back to the atomic sum.
    double mu_ball(int x, double r) const;
    double mu_ball_discrete(int x, double r) const;
    bool has_mu_profile() const { return has_profile_; }

    // V(x,y) = mu(B(x, d(x,y))), the volume entering kernel size bounds.
    // Requires x != y (V would be the measure of an empty ball otherwise).
    double volume_V(int x, int y) const;

    // (c_mu, n_est) over log-spaced radii in [r_min, r_max]:
    // c_mu  = max over samples of mu(B(x,2r)) / mu(B(x,r)),
    // n_est = through-origin LS slope of log mu(B(x,mr))/mu(B(x,r)) vs log m, m in {2,4,8}.
    std::pair<double, double> estimate_doubling(double r_min, double r_max,
                                                int num_scales = 8) const;

    // Points ordered by distance from x (self first); parallel distance array.
    const std::vector<std::int32_t>& neighbors(int x) const { return sorted_ids_[x]; }
    const std::vector<double>& neighbor_dists(int x) const { return sorted_dists_[x]; }

    // True when points carry a single coordinate sorted strictly ascending
    // (enables interval arithmetic in the dyadic module).
    bool sorted_line() const { return sorted_line_; }

private:
    Space() = default;
    void finalize();

    int n_ = 0;
    int dim_ = 0;
    double a0_ = 1.0;
    MetricKind metric_ = MetricKind::euclidean;
    BaseKind base_ = BaseKind::custom;
    double lambda_ = 0.0;
    Measure mu_;
    std::vector<double> coords_;  // n * dim, row-major
    std::vector<std::uint32_t> tree_code_;  // leaf index per point (tree metric)
    int tree_depth_ = 0;

    bool has_profile_ = false;
    double profile_lo_ = 0.0, profile_hi_ = 0.0;  // continuum support of the density

    double diameter_ = 0.0;
    double resolution_ = 0.0;
    bool sorted_line_ = false;

    std::vector<std::vector<std::int32_t>> sorted_ids_;
    std::vector<std::vector<double>> sorted_dists_;
    std::vector<std::vector<double>> mu_prefix_;  // prefix sums of mu along sorted order
};

}  // namespace hartlab
