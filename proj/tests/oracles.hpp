#pragma once

// Brute-force references shared by the unit and acceptance suites.

#include <algorithm>
#include <vector>

#include "hartlab/constants.hpp"

namespace hartlab::oracles {

// Every value achievable by a dyadic subpartition of `id` (including the
// trivial partition {id} as the first entry), each sum associated
// child-by-child exactly as the DP recursion adds.
inline std::vector<double> psi_partition_values(const DyadicSystem& d, int id,
                                                const std::vector<std::int32_t>& e_set,
                                                const Measure& u, const Measure& v,
                                                const TwoWeightParams& params) {
    std::vector<double> out{pivotal_phi(d, id, e_set, u, v, params)};
    const Cube& q = d.cube(id);
    if (q.children.empty()) return out;
    std::vector<double> sums{0.0};
    for (int c : q.children) {
        const auto child = psi_partition_values(d, c, e_set, u, v, params);
        std::vector<double> next;
        next.reserve(sums.size() * child.size());
        for (double s : sums)
            for (double x : child) next.push_back(s + x);
        sums = std::move(next);
    }
    out.insert(out.end(), sums.begin(), sums.end());
    return out;
}

inline double psi_brute(const DyadicSystem& d, int id, const std::vector<std::int32_t>& e_set,
                        const Measure& u, const Measure& v, const TwoWeightParams& params,
                        PsiMode mode = PsiMode::include_self) {
    const auto values = psi_partition_values(d, id, e_set, u, v, params);
    double best = 0.0;
    const std::size_t first = mode == PsiMode::proper ? 1 : 0;
    for (std::size_t i = first; i < values.size(); ++i) best = std::max(best, values[i]);
    return best;
}

}  // namespace hartlab::oracles
