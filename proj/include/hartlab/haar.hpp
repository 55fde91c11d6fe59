#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hartlab/dyadic.hpp"

namespace hartlab {

// Cancellative Haar function: constant on each child of its cube, zero w-mean,
// unit L2(w) norm.  Values are stored per child in canonical child order.
struct HaarFunction {
    std::int32_t cube = -1;
    int index = 0;  // 1 .. M_Q - 1
    std::vector<double> child_values;
};

// Weight-adapted Haar basis over a dyadic system.  Each cube with M effective
// children (w-mass >= 1e-12 * w(Q)) carries exactly M - 1 cancellative
// functions, built by mean-zero-constrained Gram-Schmidt in child-index order.
class HaarBasis {
public:
    static HaarBasis build(const DyadicSystem& system, Measure weight);

    const DyadicSystem& system() const { return *system_; }
    const Measure& weight() const { return weight_; }

    double cube_mass(int cube_id) const { return mass_[cube_id]; }
    const std::vector<HaarFunction>& functions(int cube_id) const { return funcs_[cube_id]; }
    int num_functions(int cube_id) const { return static_cast<int>(funcs_[cube_id].size()); }
    int effective_children(int cube_id) const { return effective_[cube_id]; }
    int max_effective_children() const;  // sup over cubes of M_Q

    double value(const HaarFunction& h, int point) const;
    double inner(const std::vector<double>& f, const std::vector<double>& g) const;
    double norm(const std::vector<double>& f) const;
    double lp_norm(const HaarFunction& h, double p) const;  // p in {1, 2} or infinity

    // Per-cube integrals of f against w, bottom-up in one sweep.
    std::vector<double> cube_integrals(const std::vector<double>& f) const;
    double coefficient(const HaarFunction& h, const std::vector<double>& f) const;
    double average(int cube_id, const std::vector<double>& f) const;  // E_Q f; throws on null cube

    // Martingale operators as dense vectors (support inside the cube/level).
    std::vector<double> expectation(int cube_id, const std::vector<double>& f) const;
    std::vector<double> haar_project(int cube_id, const std::vector<double>& f) const;
    std::vector<double> level_expectation(int k, const std::vector<double>& f) const;
    std::vector<double> level_difference(int k, const std::vector<double>& f) const;

    // (f_good, f_bad): f_bad sums Delta_Q f over cubes that fail r-goodness
    // against `other`; f_good = f - f_bad.
    std::pair<std::vector<double>, std::vector<double>> split_good_bad(
        const std::vector<double>& f, const DyadicSystem& other, int r, double eps) const;

private:
    HaarBasis() = default;
    int child_slot(const Cube& q, int point) const;  // which child holds the point, -1 if outside

    const DyadicSystem* system_ = nullptr;
    Measure weight_;
    std::vector<double> mass_;
    std::vector<int> effective_;
    std::vector<std::vector<HaarFunction>> funcs_;
};

}  // namespace hartlab
