#include "hartlab/space.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace hartlab {

double Measure::total() const { return std::accumulate(atoms.begin(), atoms.end(), 0.0); }

double Measure::mass_of(const std::vector<std::int32_t>& ids) const {
    double s = 0.0;
    for (auto i : ids) s += atoms[static_cast<std::size_t>(i)];
    return s;
}

Measure Measure::validated(std::vector<double> atoms, bool strictly_positive) {
    for (double a : atoms) {
        if (!std::isfinite(a) || a < 0.0 || (strictly_positive && a <= 0.0))
            throw ConfigError("measure atoms must be finite and " +
                              std::string(strictly_positive ? "strictly positive" : "nonnegative"));
    }
    return Measure{std::move(atoms)};
}

namespace {
constexpr int kMaxPoints = 4096;

double bessel_primitive(double t, double lambda) {
    // d/dt of sign(t)|t|^{2 lambda + 1} / (2 lambda + 1) is |t|^{2 lambda}.
    const double p = 2.0 * lambda + 1.0;
    return (t >= 0.0 ? 1.0 : -1.0) * std::pow(std::abs(t), p) / p;
}
}  // namespace

Space Space::grid1d(int n_points, double lo, double hi, BaseKind base, double lambda, double a0) {
    if (n_points < 1 || n_points > kMaxPoints) throw ConfigError("grid1d: n_points out of range");
    if (!(hi > lo)) throw ConfigError("grid1d: domain must satisfy lo < hi");
    if (a0 < 1.0) throw ConfigError("quasi-metric constant a0 must be >= 1");
    Space s;
    s.n_ = n_points;
    s.dim_ = 1;
    s.a0_ = a0;
    s.metric_ = MetricKind::euclidean;
    s.base_ = base;
    s.lambda_ = lambda;
    const double h = (hi - lo) / n_points;
    s.coords_.resize(n_points);
    std::vector<double> atoms(n_points);
    for (int i = 0; i < n_points; ++i) {
        const double x = lo + i * h;
        s.coords_[i] = x;
        switch (base) {
            case BaseKind::lebesgue: atoms[i] = h; break;
            case BaseKind::bessel: atoms[i] = std::pow(std::abs(x), 2.0 * lambda) * h; break;
            case BaseKind::custom: throw ConfigError("grid1d: custom base needs from_points");
        }
    }
    s.mu_ = Measure::validated(std::move(atoms), /*strictly_positive=*/true);
    s.has_profile_ = true;
    s.profile_lo_ = lo - 0.5 * h;
    s.profile_hi_ = hi - 0.5 * h;
    s.finalize();
    return s;
}

Space Space::grid2d(int n_points, double lo, double hi, double a0) {
    if (n_points < 1 || n_points > kMaxPoints) throw ConfigError("grid2d: n_points out of range");
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_points))));
    if (side * side != n_points) throw ConfigError("grid2d: n_points must be a perfect square");
    if (!(hi > lo)) throw ConfigError("grid2d: domain must satisfy lo < hi");
    if (a0 < 1.0) throw ConfigError("quasi-metric constant a0 must be >= 1");
    Space s;
    s.n_ = n_points;
    s.dim_ = 2;
    s.a0_ = a0;
    s.metric_ = MetricKind::euclidean;
    s.base_ = BaseKind::lebesgue;
    const double h = (hi - lo) / side;
    s.coords_.resize(static_cast<std::size_t>(n_points) * 2);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            const int id = i * side + j;
            s.coords_[2 * id] = lo + i * h;
            s.coords_[2 * id + 1] = lo + j * h;
        }
    s.mu_ = Measure::validated(std::vector<double>(n_points, h * h), true);
    s.finalize();
    return s;
}

Space Space::tree(int n_leaves) {
    if (n_leaves < 2 || n_leaves > kMaxPoints) throw ConfigError("tree: n_leaves out of range");
    if ((n_leaves & (n_leaves - 1)) != 0) throw ConfigError("tree: n_leaves must be a power of 2");
    Space s;
    s.n_ = n_leaves;
    s.dim_ = 0;
    s.a0_ = 1.0;  // ultrametric
    s.metric_ = MetricKind::tree;
    s.base_ = BaseKind::lebesgue;
    s.tree_depth_ = std::countr_zero(static_cast<unsigned>(n_leaves));
    s.tree_code_.resize(n_leaves);
    for (int i = 0; i < n_leaves; ++i) s.tree_code_[i] = static_cast<std::uint32_t>(i);
    s.mu_ = Measure::validated(std::vector<double>(n_leaves, 1.0 / n_leaves), true);
    s.finalize();
    return s;
}

Space Space::from_points(std::vector<std::vector<double>> coords, std::vector<double> atoms,
                         double a0) {
    if (coords.empty() || coords.size() > kMaxPoints) throw ConfigError("points: bad point count");
    if (atoms.size() != coords.size()) throw ConfigError("points: atoms/coords size mismatch");
    if (a0 < 1.0) throw ConfigError("quasi-metric constant a0 must be >= 1");
    const std::size_t dim = coords.front().size();
    if (dim < 1) throw ConfigError("points: coordinates must have dimension >= 1");
    Space s;
    s.n_ = static_cast<int>(coords.size());
    s.dim_ = static_cast<int>(dim);
    s.a0_ = a0;
    s.metric_ = MetricKind::euclidean;
    s.base_ = BaseKind::custom;
    s.coords_.resize(coords.size() * dim);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (coords[i].size() != dim) throw ConfigError("points: ragged coordinates");
        for (std::size_t k = 0; k < dim; ++k) s.coords_[i * dim + k] = coords[i][k];
    }
    s.mu_ = Measure::validated(std::move(atoms), true);
    s.finalize();
    return s;
}

double Space::dist(int i, int j) const {
    if (i == j) return 0.0;
    if (metric_ == MetricKind::tree) {
        const std::uint32_t x = tree_code_[i] ^ tree_code_[j];
        const int lca_depth = tree_depth_ - std::bit_width(x);
        return std::ldexp(1.0, -lca_depth);
    }
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) {
        const double d = coords_[static_cast<std::size_t>(i) * dim_ + k] -
                         coords_[static_cast<std::size_t>(j) * dim_ + k];
        s += d * d;
    }
    return std::sqrt(s);
}

void Space::finalize() {
    sorted_ids_.resize(n_);
    sorted_dists_.resize(n_);
    mu_prefix_.resize(n_);
    diameter_ = 0.0;
    resolution_ = 0.0;
    for (int x = 0; x < n_; ++x) {
        auto& ids = sorted_ids_[x];
        ids.resize(n_);
        std::iota(ids.begin(), ids.end(), 0);
        std::vector<double> d(n_);
        for (int y = 0; y < n_; ++y) d[y] = dist(x, y);
        std::sort(ids.begin(), ids.end(), [&](std::int32_t a, std::int32_t b) {
            return d[a] != d[b] ? d[a] < d[b] : a < b;
        });
        auto& sd = sorted_dists_[x];
        sd.resize(n_);
        auto& pre = mu_prefix_[x];
        pre.resize(n_);
        double acc = 0.0;
        for (int k = 0; k < n_; ++k) {
            sd[k] = d[ids[k]];
            acc += mu_.atoms[ids[k]];
            pre[k] = acc;
        }
        diameter_ = std::max(diameter_, sd.back());
        for (int k = 1; k < n_; ++k)
            if (sd[k] > 0.0) {
                resolution_ = resolution_ == 0.0 ? sd[k] : std::min(resolution_, sd[k]);
                break;
            }
    }
    sorted_line_ = dim_ == 1 && metric_ == MetricKind::euclidean;
    for (int i = 0; i + 1 < n_ && sorted_line_; ++i)
        if (!(coords_[i] < coords_[i + 1])) sorted_line_ = false;
}

int Space::count_within(int x, double r) const {
    if (r <= 0.0) return 0;
    const auto& sd = sorted_dists_[x];
    return static_cast<int>(std::lower_bound(sd.begin(), sd.end(), r) - sd.begin());
}

double Space::ball_measure(int x, double r, const Measure& w) const {
    const int k = count_within(x, r);
    const auto& ids = sorted_ids_[x];
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += w.atoms[ids[i]];
    return s;
}

double Space::mu_ball_discrete(int x, double r) const {
    const int k = count_within(x, r);
    return k == 0 ? 0.0 : mu_prefix_[x][k - 1];
}

double Space::mu_ball(int x, double r) const {
    if (!has_profile_) return mu_ball_discrete(x, r);
    if (r <= 0.0) return 0.0;
    const double c = coords_[x];
    const double lo = std::max(profile_lo_, c - r);
    const double hi = std::min(profile_hi_, c + r);
    if (hi <= lo) return 0.0;
    if (base_ == BaseKind::lebesgue) return hi - lo;
    return bessel_primitive(hi, lambda_) - bessel_primitive(lo, lambda_);
}

double Space::volume_V(int x, int y) const {
    if (x == y) throw ConfigError("volume_V requires distinct points");
    return mu_ball_discrete(x, dist(x, y));
}

std::pair<double, double> Space::estimate_doubling(double r_min, double r_max,
                                                   int num_scales) const {
    if (!(r_min > 0.0) || !(r_max >= r_min) || num_scales < 1)
        throw ConfigError("estimate_doubling: need 0 < r_min <= r_max and num_scales >= 1");

    // Growth ratios are meaningful only while the grown ball stays inside the
    // space, so coordinate spaces sample away from the bounding-box edges.
    std::vector<double> box_lo(dim_, 0.0), box_hi(dim_, 0.0);
    for (int k = 0; k < dim_; ++k) {
        box_lo[k] = box_hi[k] = coords_[k];
        for (int i = 1; i < n_; ++i) {
            box_lo[k] = std::min(box_lo[k], coord(i, k));
            box_hi[k] = std::max(box_hi[k], coord(i, k));
        }
    }
    auto interior = [&](int x, double radius) {
        for (int k = 0; k < dim_; ++k) {
            const double c = coord(x, k);
            if (c - radius < box_lo[k] || c + radius > box_hi[k]) return false;
        }
        return true;
    };

    const int stride = std::max(1, n_ / 256);
    const double log_step = num_scales > 1 ? std::log(r_max / r_min) / (num_scales - 1) : 0.0;
    double c_mu = 1.0;
    double sxx = 0.0, sxy = 0.0;
    long samples = 0;
    auto sweep = [&](bool filtered) {
        for (int j = 0; j < num_scales; ++j) {
            const double r = r_min * std::exp(log_step * j);
            for (int x = 0; x < n_; x += stride) {
                const double base = mu_ball_discrete(x, r);
                if (base <= 0.0) continue;
                for (double m : {2.0, 4.0, 8.0}) {
                    if (filtered && !interior(x, m * r)) continue;
                    const double grown = mu_ball_discrete(x, m * r);
                    if (grown <= 0.0) continue;
                    if (m == 2.0) c_mu = std::max(c_mu, grown / base);
                    const double lx = std::log(m), ly = std::log(grown / base);
                    sxx += lx * lx;
                    sxy += lx * ly;
                    ++samples;
                }
            }
        }
    };
    sweep(true);
    if (samples == 0) sweep(false);
    const double n_est = sxx > 0.0 ? sxy / sxx : 0.0;
    return {c_mu, n_est};
}

}  // namespace hartlab
