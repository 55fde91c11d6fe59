#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "hartlab/space.hpp"

namespace hartlab {

enum class DyadicMode { shifted1d, generic };

struct DyadicParams {
    DyadicMode mode = DyadicMode::shifted1d;
    double delta = 0.5;
    double c0 = 1.0;
    double C0 = 1.0;
    int k_min = 0;
    // Sentinel: descend until every finest cube is a single point.
    static constexpr int kAutoDepth = std::numeric_limits<int>::min();
    int k_max = kAutoDepth;

    void validate(const Space& space) const;
};

struct Cube {
    std::int32_t id = -1;
    std::int32_t level = 0;    // side length = delta^level
    std::int32_t parent = -1;  // cube id, -1 for roots
    std::int32_t center = -1;  // point id (net/reference point)
    double side = 1.0;
    std::vector<std::int32_t> children;  // cube ids in canonical order
    std::vector<std::int32_t> members;   // point ids, ascending
    // 1D interval caches (shifted1d mode): member coordinate range and the
    // coordinates of the nearest grid points outside each end.
    double min_coord = 0.0, max_coord = 0.0;
    double below_coord = -std::numeric_limits<double>::infinity();
    double above_coord = std::numeric_limits<double>::infinity();
};

// Random dyadic cube system: every level partitions the point set, cubes nest,
// and each cube sits between an inner and an outer ball around its center with
// the measured constants c1, C1.
class DyadicSystem {
public:
    static DyadicSystem build(const Space& space, const DyadicParams& params, std::uint64_t seed);

    const Space& space() const { return *space_; }
    const DyadicParams& params() const { return params_; }
    std::uint64_t seed() const { return seed_; }
    double shift() const { return shift_; }
    int k_min() const { return k_min_; }
    int k_max() const { return k_max_; }
    double c1() const { return c1_; }
    double C1() const { return C1_; }

    const std::vector<Cube>& cubes() const { return cubes_; }
    const Cube& cube(int id) const { return cubes_[static_cast<std::size_t>(id)]; }
    int num_cubes() const { return static_cast<int>(cubes_.size()); }
    const std::vector<std::int32_t>& level_cubes(int k) const;
    const std::vector<std::int32_t>& roots() const { return roots_; }
    int cube_of(int k, int point) const;  // cube id containing point at level k
    bool contains(int coarse_id, int fine_id) const;

    double weight_of(int cube_id, const Measure& w) const;

    double dist_to_cube(int point, int cube_id) const;
    double dist_cubes(int a, int b) const;
    // min over y outside the cube of d(point, y); +inf when the cube is all of X.
    double dist_to_complement(int point, int cube_id) const;
    // min over members of `q` of dist_to_complement(., q1).
    double dist_to_complement_of(int q, int q1) const;
    // Distance between our cube `q` and cube `q1` of another system on the same space.
    double cross_dist_cubes(const DyadicSystem& other, int q, int q1) const;

    // Two-sided layer: points within eps of the cube and of its complement.
    std::vector<std::int32_t> boundary_layer(int cube_id, double eps) const;

    // r-goodness of `cube_id` against every cube of `other` coarser by >= r levels.
    bool is_good(int cube_id, const DyadicSystem& other, int r, double eps) const;

    // Exhaustive structural validation; throws RuntimeFailure on violation.
    void check_invariants() const;

private:
    DyadicSystem() = default;
    void build_shifted(std::uint64_t seed);
    void build_generic(std::uint64_t seed);
    void finish();  // caches, measured c1/C1, outer-ball fixpoint
    double cross_dist(const DyadicSystem& other, const Cube& q, const Cube& q1) const;
    double cross_complement_dist(const DyadicSystem& other, const Cube& q, const Cube& q1) const;

    const Space* space_ = nullptr;
    DyadicParams params_;
    std::uint64_t seed_ = 0;
    double shift_ = 0.0;
    int k_min_ = 0, k_max_ = 0;
    double c1_ = 0.0, C1_ = 0.0;
    std::vector<Cube> cubes_;
    std::vector<std::vector<std::int32_t>> levels_;   // [k - k_min] -> cube ids
    std::vector<std::vector<std::int32_t>> cube_of_;  // [k - k_min][point] -> cube id
    std::vector<std::int32_t> roots_;
    std::vector<std::vector<std::uint8_t>> net_mask_;  // generic mode: [level][point]
};

struct SurgeryEstimate {
    double probability = 0.0;
    double stderr_ = 0.0;
    int trials = 0;
};

// Monte Carlo estimate of P(x lies in the tau*delta^k boundary layer of some
// level-k cube) over independently sampled systems.
SurgeryEstimate surgery_probability(const Space& space, const DyadicParams& params, int point,
                                    int level, double tau, int trials, std::uint64_t seed);

}  // namespace hartlab
