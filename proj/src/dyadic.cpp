#include "hartlab/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "hartlab/rng.hpp"

namespace hartlab {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void DyadicParams::validate(const Space& space) const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("dyadic: delta must lie in (0,1)");
    if (k_max != kAutoDepth && k_max < k_min) throw ConfigError("dyadic: k_max < k_min");
    if (mode == DyadicMode::shifted1d) {
        if (delta != 0.5) throw ConfigError("dyadic: shifted1d mode requires delta = 1/2");
        if (!space.sorted_line())
            throw ConfigError("dyadic: shifted1d mode needs a 1D space with sorted coordinates");
    } else {
        if (!(c0 > 0.0) || !(C0 >= c0)) throw ConfigError("dyadic: need 0 < c0 <= C0");
        const double a0 = space.a0();
        if (12.0 * a0 * a0 * a0 * C0 * delta > c0 * (1.0 + 1e-12))
            throw ConfigError("dyadic: generic mode requires 12*A0^3*C0*delta <= c0");
    }
}

DyadicSystem DyadicSystem::build(const Space& space, const DyadicParams& params,
                                 std::uint64_t seed) {
    params.validate(space);
    DyadicSystem sys;
    sys.space_ = &space;
    sys.params_ = params;
    sys.seed_ = seed;
    if (params.mode == DyadicMode::shifted1d)
        sys.build_shifted(seed);
    else
        sys.build_generic(seed);
    sys.finish();
    return sys;
}

void DyadicSystem::build_shifted(std::uint64_t seed) {
    const Space& sp = *space_;
    const int n = sp.size();
    // 53 shift bits drawn from the seed stream; seed 0 keeps the standard grid.
    shift_ = seed == 0 ? 0.0 : Rng::stream(seed, "shift").uniform01();
    k_min_ = params_.k_min;
    if (params_.k_max == DyadicParams::kAutoDepth) {
        k_max_ = k_min_;
        if (sp.resolution() > 0.0)
            while (std::ldexp(1.0, -k_max_) > sp.resolution() && k_max_ - k_min_ < 60) ++k_max_;
    } else {
        k_max_ = params_.k_max;
    }
    if (k_max_ - k_min_ > 60) throw ConfigError("dyadic: level range too deep");

    // Integer cell index per point at the finest level; coarser levels divide
    // it down, which keeps nesting exact regardless of rounding.
    std::vector<std::int64_t> fine(n);
    for (int i = 0; i < n; ++i)
        fine[i] = static_cast<std::int64_t>(
            std::floor((sp.coord(i, 0) - shift_) * std::ldexp(1.0, k_max_)));

    std::map<std::int64_t, std::int32_t> previous;  // cell index -> cube id at level k-1
    for (int k = k_min_; k <= k_max_; ++k) {
        const double side = std::ldexp(1.0, -k);
        const std::int64_t down = std::int64_t{1} << (k_max_ - k);
        std::map<std::int64_t, std::int32_t> current;
        int i = 0;
        while (i < n) {
            const std::int64_t m = floor_div(fine[i], down);
            int j = i;
            while (j < n && floor_div(fine[j], down) == m) ++j;
            Cube q;
            q.id = static_cast<std::int32_t>(cubes_.size());
            q.level = k;
            q.side = side;
            q.members.resize(j - i);
            std::iota(q.members.begin(), q.members.end(), i);
            q.min_coord = sp.coord(i, 0);
            q.max_coord = sp.coord(j - 1, 0);
            q.below_coord = i > 0 ? sp.coord(i - 1, 0) : -kInf;
            q.above_coord = j < n ? sp.coord(j, 0) : kInf;
            const double mid = shift_ + (static_cast<double>(m) + 0.5) * side;
            q.center = q.members.front();
            for (auto p : q.members)
                if (std::abs(sp.coord(p, 0) - mid) < std::abs(sp.coord(q.center, 0) - mid))
                    q.center = p;
            if (k > k_min_) {
                q.parent = previous.at(floor_div(m, 2));
                cubes_[q.parent].children.push_back(q.id);
            }
            current.emplace(m, q.id);
            cubes_.push_back(std::move(q));
            i = j;
        }
        previous = std::move(current);
    }
}

void DyadicSystem::build_generic(std::uint64_t seed) {
    const Space& sp = *space_;
    const int n = sp.size();
    k_min_ = params_.k_min;
    if (params_.k_max == DyadicParams::kAutoDepth) {
        k_max_ = k_min_;
        if (sp.resolution() > 0.0)
            while (params_.c0 * std::pow(params_.delta, k_max_) > sp.resolution() &&
                   k_max_ - k_min_ < 60)
                ++k_max_;
    } else {
        k_max_ = params_.k_max;
    }
    if (k_max_ - k_min_ > 60) throw ConfigError("dyadic: level range too deep");
    const int num_levels = k_max_ - k_min_ + 1;

    // Random priority order: the seed's only role in this mode.
    std::vector<std::int32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::stream(seed, "net-priority");
    rng.shuffle(order);
    std::vector<std::int32_t> rank(n);
    for (int i = 0; i < n; ++i) rank[order[i]] = i;

    // Nested maximal separated nets: net(k) is extended into net(k+1).
    std::vector<std::vector<std::int32_t>> net(num_levels);
    net_mask_.assign(num_levels, std::vector<std::uint8_t>(n, 0));
    for (int li = 0; li < num_levels; ++li) {
        const double sep = params_.c0 * std::pow(params_.delta, k_min_ + li);
        if (li > 0) {
            net[li] = net[li - 1];
            for (auto p : net[li]) net_mask_[li][p] = 1;
        }
        for (auto p : order) {
            if (net_mask_[li][p]) continue;
            bool ok = true;
            for (auto q : net[li])
                if (sp.dist(p, q) < sep) {
                    ok = false;
                    break;
                }
            if (ok) {
                net[li].push_back(p);
                net_mask_[li][p] = 1;
            }
        }
    }

    // Nearest net point with priority tie-break.
    auto assign = [&](int point, const std::vector<std::int32_t>& candidates) {
        std::int32_t best = candidates.front();
        double best_d = sp.dist(point, best);
        for (auto q : candidates) {
            const double d = sp.dist(point, q);
            if (d < best_d || (d == best_d && rank[q] < rank[best])) {
                best = q;
                best_d = d;
            }
        }
        return best;
    };

    // One cube per net point per level, in net insertion order.
    std::vector<std::vector<std::int32_t>> cube_id(num_levels, std::vector<std::int32_t>(n, -1));
    for (int li = 0; li < num_levels; ++li) {
        const double side = std::pow(params_.delta, k_min_ + li);
        for (auto z : net[li]) {
            Cube q;
            q.id = static_cast<std::int32_t>(cubes_.size());
            q.level = k_min_ + li;
            q.side = side;
            q.center = z;
            cube_id[li][z] = q.id;
            cubes_.push_back(std::move(q));
        }
    }
    // Parent links: net point at level k+1 attaches to the nearest level-k net point.
    for (int li = 1; li < num_levels; ++li)
        for (auto z : net[li]) {
            const std::int32_t child = cube_id[li][z];
            const std::int32_t up = cube_id[li - 1][net_mask_[li - 1][z] ? z : assign(z, net[li - 1])];
            cubes_[child].parent = up;
            cubes_[up].children.push_back(child);
        }
    // Membership: points attach at the finest level and ride the parent chain.
    std::vector<std::int32_t> holder(n);
    for (int p = 0; p < n; ++p) holder[p] = cube_id[num_levels - 1][assign(p, net[num_levels - 1])];
    for (int li = num_levels - 1; li >= 0; --li) {
        for (int p = 0; p < n; ++p) cubes_[holder[p]].members.push_back(p);
        if (li > 0)
            for (int p = 0; p < n; ++p) holder[p] = cubes_[holder[p]].parent;
    }
    for (auto& q : cubes_) {
        if (q.members.empty()) throw RuntimeFailure("dyadic: empty generic cube");
        std::sort(q.members.begin(), q.members.end());
    }
}

void DyadicSystem::finish() {
    const int num_levels = k_max_ - k_min_ + 1;
    levels_.assign(num_levels, {});
    for (const auto& q : cubes_) levels_[q.level - k_min_].push_back(q.id);
    for (const auto& q : cubes_)
        if (q.parent < 0 && q.level == k_min_) roots_.push_back(q.id);

    cube_of_.assign(num_levels, std::vector<std::int32_t>(space_->size(), -1));
    for (const auto& q : cubes_)
        for (auto p : q.members) cube_of_[q.level - k_min_][p] = q.id;
    for (int li = 0; li < num_levels; ++li)
        for (int p = 0; p < space_->size(); ++p)
            if (cube_of_[li][p] < 0) throw RuntimeFailure("dyadic: level does not cover the space");

    // Measured inner constant: the largest inner-ball radius valid for every cube.
    c1_ = kInf;
    for (const auto& q : cubes_) {
        const double r_in = dist_to_complement(q.center, q.id);
        if (std::isfinite(r_in)) c1_ = std::min(c1_, r_in / q.side);
    }

    // Measured outer constant, inflated until the child outer ball always sits
    // inside the parent outer ball (fixpoint; converges since side ratios < 1).
    C1_ = 0.0;
    for (const auto& q : cubes_)
        for (auto p : q.members) C1_ = std::max(C1_, space_->dist(q.center, p) / q.side);
    if (C1_ == 0.0) C1_ = 1.0;
    for (int pass = 0; pass < 1000; ++pass) {
        bool grew = false;
        for (const auto& q : cubes_) {
            if (q.parent < 0) continue;
            const Cube& up = cubes_[q.parent];
            const auto& ids = space_->neighbors(q.center);
            const int within = space_->count_within(q.center, C1_ * q.side);
            for (int t = 0; t < within; ++t) {
                const double need = space_->dist(up.center, ids[t]) / up.side;
                if (need >= C1_) {
                    C1_ = need * (1.0 + 1e-12) + 1e-300;
                    grew = true;
                }
            }
        }
        if (!grew) return;
    }
    throw RuntimeFailure("dyadic: outer-ball constant did not stabilize");
}

const std::vector<std::int32_t>& DyadicSystem::level_cubes(int k) const {
    if (k < k_min_ || k > k_max_) throw ConfigError("dyadic: level out of range");
    return levels_[k - k_min_];
}

int DyadicSystem::cube_of(int k, int point) const {
    if (k < k_min_ || k > k_max_) throw ConfigError("dyadic: level out of range");
    return cube_of_[k - k_min_][point];
}

bool DyadicSystem::contains(int coarse_id, int fine_id) const {
    int q = fine_id;
    while (q >= 0) {
        if (q == coarse_id) return true;
        q = cubes_[q].parent;
    }
    return false;
}

double DyadicSystem::weight_of(int cube_id, const Measure& w) const {
    return w.mass_of(cubes_[cube_id].members);
}

double DyadicSystem::dist_to_cube(int point, int cube_id) const {
    const Cube& q = cubes_[cube_id];
    if (params_.mode == DyadicMode::shifted1d) {
        const double x = space_->coord(point, 0);
        if (x < q.min_coord) return q.min_coord - x;
        if (x > q.max_coord) return x - q.max_coord;
        return 0.0;
    }
    double best = kInf;
    for (auto m : q.members) best = std::min(best, space_->dist(point, m));
    return best;
}

double DyadicSystem::dist_cubes(int a, int b) const {
    const Cube& qa = cubes_[a];
    const Cube& qb = cubes_[b];
    if (params_.mode == DyadicMode::shifted1d) {
        if (qa.min_coord > qb.max_coord) return qa.min_coord - qb.max_coord;
        if (qb.min_coord > qa.max_coord) return qb.min_coord - qa.max_coord;
        return 0.0;
    }
    double best = kInf;
    for (auto m : qa.members) best = std::min(best, dist_to_cube(m, b));
    return best;
}

double DyadicSystem::dist_to_complement(int point, int cube_id) const {
    const Cube& q = cubes_[cube_id];
    if (params_.mode == DyadicMode::shifted1d) {
        const double x = space_->coord(point, 0);
        if (x < q.min_coord || x > q.max_coord) return 0.0;
        return std::min(x - q.below_coord, q.above_coord - x);
    }
    if (!std::binary_search(q.members.begin(), q.members.end(), point)) return 0.0;
    if (static_cast<int>(q.members.size()) == space_->size()) return kInf;
    for (std::size_t t = 0; t < space_->neighbors(point).size(); ++t) {
        const std::int32_t y = space_->neighbors(point)[t];
        if (!std::binary_search(q.members.begin(), q.members.end(), y))
            return space_->neighbor_dists(point)[t];
    }
    return kInf;
}

double DyadicSystem::dist_to_complement_of(int q, int q1) const {
    const Cube& qa = cubes_[q];
    const Cube& qb = cubes_[q1];
    if (params_.mode == DyadicMode::shifted1d) {
        if (qa.min_coord < qb.min_coord || qa.max_coord > qb.max_coord) return 0.0;
        return std::min(qa.min_coord - qb.below_coord, qb.above_coord - qa.max_coord);
    }
    double best = kInf;
    for (auto m : qa.members) best = std::min(best, dist_to_complement(m, q1));
    return best;
}

std::vector<std::int32_t> DyadicSystem::boundary_layer(int cube_id, double eps) const {
    if (eps < 0.0) throw ConfigError("boundary_layer: eps must be >= 0");
    std::vector<std::int32_t> out;
    for (int p = 0; p < space_->size(); ++p)
        if (dist_to_cube(p, cube_id) <= eps && dist_to_complement(p, cube_id) <= eps)
            out.push_back(p);
    return out;
}

bool DyadicSystem::is_good(int cube_id, const DyadicSystem& other, int r, double eps) const {
    if (space_ != other.space_) throw ConfigError("is_good: systems live on different spaces");
    if (r < 1 || !(eps > 0.0 && eps < 1.0)) throw ConfigError("is_good: need r >= 1, eps in (0,1)");
    const Cube& q = cubes_[cube_id];
    for (int k = other.k_min_; k <= std::min(other.k_max_, q.level - r); ++k) {
        for (auto id1 : other.level_cubes(k)) {
            const Cube& q1 = other.cubes_[id1];
            const double thr = std::pow(q.side, eps) * std::pow(q1.side, 1.0 - eps);
            if (cross_dist(other, q, q1) >= thr) continue;
            if (cross_complement_dist(other, q, q1) >= thr) continue;
            return false;
        }
    }
    return true;
}

double DyadicSystem::cross_dist_cubes(const DyadicSystem& other, int q, int q1) const {
    if (space_ != other.space_) throw ConfigError("systems live on different spaces");
    return cross_dist(other, cubes_[static_cast<std::size_t>(q)],
                      other.cubes_[static_cast<std::size_t>(q1)]);
}

double DyadicSystem::cross_dist(const DyadicSystem& other, const Cube& q, const Cube& q1) const {
    if (params_.mode == DyadicMode::shifted1d && other.params_.mode == DyadicMode::shifted1d) {
        if (q.min_coord > q1.max_coord) return q.min_coord - q1.max_coord;
        if (q1.min_coord > q.max_coord) return q1.min_coord - q.max_coord;
        return 0.0;
    }
    double best = kInf;
    for (auto m : q.members) {
        for (auto m1 : q1.members) best = std::min(best, space_->dist(m, m1));
    }
    return best;
}

double DyadicSystem::cross_complement_dist(const DyadicSystem& other, const Cube& q,
                                           const Cube& q1) const {
    if (params_.mode == DyadicMode::shifted1d && other.params_.mode == DyadicMode::shifted1d) {
        if (q.min_coord < q1.min_coord || q.max_coord > q1.max_coord) return 0.0;
        return std::min(q.min_coord - q1.below_coord, q1.above_coord - q.max_coord);
    }
    double best = kInf;
    for (auto m : q.members) {
        const auto& ids = space_->neighbors(m);
        const auto& ds = space_->neighbor_dists(m);
        for (std::size_t t = 0; t < ids.size(); ++t) {
            if (!std::binary_search(q1.members.begin(), q1.members.end(), ids[t])) {
                best = std::min(best, ds[t]);
                break;
            }
        }
    }
    return best;
}

void DyadicSystem::check_invariants() const {
    const Space& sp = *space_;
    const int n = sp.size();
    for (int k = k_min_; k <= k_max_; ++k) {
        std::vector<int> seen(n, 0);
        for (auto id : level_cubes(k)) {
            const Cube& q = cubes_[id];
            if (q.members.empty()) throw RuntimeFailure("invariant: empty cube");
            for (auto p : q.members) seen[p]++;
        }
        for (int p = 0; p < n; ++p)
            if (seen[p] != 1) throw RuntimeFailure("invariant: level is not a partition");
    }
    for (const auto& q : cubes_) {
        if (q.level < k_max_) {
            if (q.children.empty()) throw RuntimeFailure("invariant: interior cube has no child");
            std::vector<std::int32_t> acc;
            for (auto c : q.children) {
                if (cubes_[c].parent != q.id) throw RuntimeFailure("invariant: broken parent link");
                acc.insert(acc.end(), cubes_[c].members.begin(), cubes_[c].members.end());
            }
            std::sort(acc.begin(), acc.end());
            if (acc != q.members) throw RuntimeFailure("invariant: nesting violated");
        } else if (!q.children.empty()) {
            throw RuntimeFailure("invariant: finest-level cube has children");
        }
        // Inner and outer ball containment at the measured constants.
        const double r_in = dist_to_complement(q.center, q.id);
        if (r_in < c1_ * q.side * (1.0 - 1e-12))
            throw RuntimeFailure("invariant: inner ball containment violated");
        for (auto p : q.members)
            if (sp.dist(q.center, p) > C1_ * q.side * (1.0 + 1e-12))
                throw RuntimeFailure("invariant: outer ball containment violated");
        // Monotone outer-ball containment along parent links.
        if (q.parent >= 0) {
            const Cube& up = cubes_[q.parent];
            const int within = sp.count_within(q.center, C1_ * q.side);
            for (int t = 0; t < within; ++t)
                if (sp.dist(up.center, sp.neighbors(q.center)[t]) >= C1_ * up.side * (1.0 + 1e-12))
                    throw RuntimeFailure("invariant: outer balls not monotone");
        }
    }
    if (params_.mode == DyadicMode::generic) {
        for (int k = k_min_; k <= k_max_; ++k) {
            const double sep = params_.c0 * std::pow(params_.delta, k);
            const double cov = params_.C0 * std::pow(params_.delta, k);
            const auto& ids = level_cubes(k);
            for (std::size_t a = 0; a < ids.size(); ++a)
                for (std::size_t b = a + 1; b < ids.size(); ++b)
                    if (sp.dist(cubes_[ids[a]].center, cubes_[ids[b]].center) <
                        sep * (1.0 - 1e-12))
                        throw RuntimeFailure("invariant: net separation violated");
            for (int p = 0; p < n; ++p) {
                double best = kInf;
                for (auto id : ids) best = std::min(best, sp.dist(p, cubes_[id].center));
                if (best > cov * (1.0 + 1e-12))
                    throw RuntimeFailure("invariant: net covering violated");
            }
        }
    }
}

SurgeryEstimate surgery_probability(const Space& space, const DyadicParams& params, int point,
                                    int level, double tau, int trials, std::uint64_t seed) {
    if (trials < 1) throw ConfigError("surgery: trials must be >= 1");
    if (tau < 0.0) throw ConfigError("surgery: tau must be >= 0");
    if (point < 0 || point >= space.size()) throw ConfigError("surgery: point out of range");
    DyadicParams level_only = params;
    level_only.k_min = level;
    level_only.k_max = level;
    const double eps = tau * std::pow(params.delta, level);
    Rng rng = Rng::stream(seed, "surgery");
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
        const DyadicSystem sys = DyadicSystem::build(space, level_only, rng.next_u64());
        bool hit = false;
        for (auto id : sys.level_cubes(level)) {
            if (sys.dist_to_cube(point, id) <= eps && sys.dist_to_complement(point, id) <= eps) {
                hit = true;
                break;
            }
        }
        hits += hit ? 1 : 0;
    }
    const double p = static_cast<double>(hits) / trials;
    return SurgeryEstimate{p, std::sqrt(p * (1.0 - p) / trials), trials};
}

}  // namespace hartlab
