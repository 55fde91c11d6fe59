#include "hartlab/haar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hartlab {

namespace {
constexpr double kMassFloor = 1e-12;  // children below this fraction of w(Q) are dropped
}

HaarBasis HaarBasis::build(const DyadicSystem& system, Measure weight) {
    if (static_cast<int>(weight.atoms.size()) != system.space().size())
        throw ConfigError("haar: weight size does not match the space");
    weight = Measure::validated(std::move(weight.atoms), /*strictly_positive=*/false);

    HaarBasis basis;
    basis.system_ = &system;
    basis.weight_ = std::move(weight);
    const int nc = system.num_cubes();
    basis.mass_.resize(nc);
    basis.effective_.assign(nc, 0);
    basis.funcs_.resize(nc);
    for (int id = 0; id < nc; ++id)
        basis.mass_[id] = basis.weight_.mass_of(system.cube(id).members);

    for (int id = 0; id < nc; ++id) {
        const Cube& q = system.cube(id);
        const double W = basis.mass_[id];
        if (q.children.empty() || W <= 0.0) continue;
        const int m = static_cast<int>(q.children.size());
        std::vector<double> cm(m);
        std::vector<int> keep;
        for (int c = 0; c < m; ++c) {
            cm[c] = basis.mass_[q.children[c]];
            if (cm[c] >= kMassFloor * W) keep.push_back(c);
        }
        basis.effective_[id] = static_cast<int>(keep.size());
        if (keep.size() < 2) continue;

        const auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
            double s = 0.0;
            for (int c : keep) s += cm[c] * a[c] * b[c];
            return s;
        };
        // Mean-zero seeds e_i - (m_i / W) 1 over the first M-1 effective
        // children, orthonormalized in order (two passes for stability).
        std::vector<std::vector<double>> accepted;
        for (std::size_t i = 0; i + 1 < keep.size(); ++i) {
            std::vector<double> v(m, 0.0);
            for (int c : keep) v[c] = -cm[keep[i]] / W;
            v[keep[i]] += 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& h : accepted) {
                    const double proj = dot(v, h);
                    for (int c : keep) v[c] -= proj * h[c];
                }
            const double nrm = std::sqrt(dot(v, v));
            if (!(nrm > 0.0)) throw RuntimeFailure("haar: degenerate Gram-Schmidt step");
            for (int c : keep) v[c] /= nrm;
            for (int c : keep)
                if (v[c] != 0.0) {
                    if (v[c] < 0.0)
                        for (int cc : keep) v[cc] = -v[cc];
                    break;
                }
            accepted.push_back(v);
            HaarFunction h;
            h.cube = id;
            h.index = static_cast<int>(accepted.size());
            h.child_values = accepted.back();
            basis.funcs_[id].push_back(std::move(h));
        }
    }
    return basis;
}

int HaarBasis::max_effective_children() const {
    int m = 0;
    for (int e : effective_) m = std::max(m, e);
    return m;
}

int HaarBasis::child_slot(const Cube& q, int point) const {
    if (q.children.empty()) return -1;
    if (system_->cube_of(q.level, point) != q.id) return -1;
    const int child = system_->cube_of(q.level + 1, point);
    for (std::size_t c = 0; c < q.children.size(); ++c)
        if (q.children[c] == child) return static_cast<int>(c);
    return -1;
}

double HaarBasis::value(const HaarFunction& h, int point) const {
    const int slot = child_slot(system_->cube(h.cube), point);
    return slot < 0 ? 0.0 : h.child_values[slot];
}

double HaarBasis::inner(const std::vector<double>& f, const std::vector<double>& g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < weight_.atoms.size(); ++i) s += weight_.atoms[i] * f[i] * g[i];
    return s;
}

double HaarBasis::norm(const std::vector<double>& f) const { return std::sqrt(inner(f, f)); }

double HaarBasis::lp_norm(const HaarFunction& h, double p) const {
    const Cube& q = system_->cube(h.cube);
    if (std::isinf(p)) {
        double m = 0.0;
        for (std::size_t c = 0; c < q.children.size(); ++c)
            if (mass_[q.children[c]] > 0.0) m = std::max(m, std::abs(h.child_values[c]));
        return m;
    }
    double s = 0.0;
    for (std::size_t c = 0; c < q.children.size(); ++c)
        s += mass_[q.children[c]] * std::pow(std::abs(h.child_values[c]), p);
    return std::pow(s, 1.0 / p);
}

std::vector<double> HaarBasis::cube_integrals(const std::vector<double>& f) const {
    std::vector<double> acc(system_->num_cubes(), 0.0);
    for (int k = system_->k_max(); k >= system_->k_min(); --k) {
        for (auto id : system_->level_cubes(k)) {
            const Cube& q = system_->cube(id);
            double s = 0.0;
            if (q.children.empty())
                for (auto p : q.members) s += weight_.atoms[p] * f[p];
            else
                for (auto c : q.children) s += acc[c];
            acc[id] = s;
        }
    }
    return acc;
}

double HaarBasis::coefficient(const HaarFunction& h, const std::vector<double>& f) const {
    const Cube& q = system_->cube(h.cube);
    double s = 0.0;
    for (std::size_t c = 0; c < q.children.size(); ++c) {
        if (h.child_values[c] == 0.0) continue;
        double integral = 0.0;
        for (auto p : system_->cube(q.children[c]).members)
            integral += weight_.atoms[p] * f[p];
        s += h.child_values[c] * integral;
    }
    return s;
}

double HaarBasis::average(int cube_id, const std::vector<double>& f) const {
    if (mass_[cube_id] <= 0.0) throw ConfigError("haar: average over a w-null cube");
    double s = 0.0;
    for (auto p : system_->cube(cube_id).members) s += weight_.atoms[p] * f[p];
    return s / mass_[cube_id];
}

std::vector<double> HaarBasis::expectation(int cube_id, const std::vector<double>& f) const {
    std::vector<double> out(f.size(), 0.0);
    if (mass_[cube_id] <= 0.0) return out;
    const double a = average(cube_id, f);
    for (auto p : system_->cube(cube_id).members) out[p] = a;
    return out;
}

std::vector<double> HaarBasis::haar_project(int cube_id, const std::vector<double>& f) const {
    std::vector<double> out(f.size(), 0.0);
    for (const auto& h : funcs_[cube_id]) {
        const double coef = coefficient(h, f);
        const Cube& q = system_->cube(h.cube);
        for (std::size_t c = 0; c < q.children.size(); ++c) {
            if (h.child_values[c] == 0.0) continue;
            for (auto p : system_->cube(q.children[c]).members)
                out[p] += coef * h.child_values[c];
        }
    }
    return out;
}

std::vector<double> HaarBasis::level_expectation(int k, const std::vector<double>& f) const {
    std::vector<double> out(f.size(), 0.0);
    for (auto id : system_->level_cubes(k)) {
        if (mass_[id] <= 0.0) continue;
        const double a = average(id, f);
        for (auto p : system_->cube(id).members) out[p] = a;
    }
    return out;
}

std::vector<double> HaarBasis::level_difference(int k, const std::vector<double>& f) const {
    std::vector<double> up = level_expectation(k, f);
    const std::vector<double> down = level_expectation(k + 1, f);
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = down[i] - up[i];
    return up;
}

std::pair<std::vector<double>, std::vector<double>> HaarBasis::split_good_bad(
    const std::vector<double>& f, const DyadicSystem& other, int r, double eps) const {
    std::vector<double> bad(f.size(), 0.0);
    for (int id = 0; id < system_->num_cubes(); ++id) {
        if (funcs_[id].empty()) continue;
        if (system_->is_good(id, other, r, eps)) continue;
        const std::vector<double> d = haar_project(id, f);
        for (std::size_t i = 0; i < bad.size(); ++i) bad[i] += d[i];
    }
    std::vector<double> good = f;
    for (std::size_t i = 0; i < good.size(); ++i) good[i] -= bad[i];
    return {std::move(good), std::move(bad)};
}

}  // namespace hartlab
