#include "hartlab/operators.hpp"

#include <cmath>
#include <cstdlib>

#include "hartlab/rng.hpp"

namespace hartlab {

namespace {

double sign_of(int i) { return (i & 1) ? -1.0 : 1.0; }

}  // namespace

void Kernel::validate(const Space& s) const {
    if (!(kappa > 0.0) || kappa > 1.0) throw ConfigError("kernel kappa must lie in (0,1]");
    switch (kind) {
        case KernelKind::zero:
        case KernelKind::power:
            return;
        case KernelKind::hilbert1d:
            if (s.dim() != 1 || s.metric() != MetricKind::euclidean)
                throw ConfigError("hilbert1d kernel requires 1D euclidean coordinates");
            return;
        case KernelKind::riesz:
            if (!(d_exp > 0.0)) throw ConfigError("riesz kernel requires d > 0");
            if (s.metric() != MetricKind::euclidean)
                throw ConfigError("riesz kernel requires euclidean coordinates");
            if (component < 0 || component >= s.dim())
                throw ConfigError("riesz component exceeds the space dimension");
            return;
    }
    throw ConfigError("unknown kernel kind");
}

OperatorMatrix OperatorMatrix::assemble(const Space& s, const Kernel& k) {
    k.validate(s);
    OperatorMatrix m;
    m.space_ = &s;
    m.kernel_ = k;
    const int n = s.size();
    m.entries_ = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double value = 0.0;
            switch (k.kind) {
                case KernelKind::zero:
                    break;
                case KernelKind::hilbert1d: {
                    const double dx = s.coord(i, 0) - s.coord(j, 0);
                    if (dx == 0.0) throw RuntimeFailure("hilbert1d kernel at coincident coordinates");
                    value = 1.0 / dx;
                    break;
                }
                case KernelKind::riesz: {
                    const double r = s.dist(i, j);
                    if (r == 0.0) throw RuntimeFailure("riesz kernel at coincident points");
                    value = (s.coord(i, k.component) - s.coord(j, k.component)) /
                            std::pow(r, k.d_exp + 1.0);
                    break;
                }
                case KernelKind::power:
                    value = sign_of(i) * sign_of(j) / s.volume_V(i, j);
                    break;
            }
            m.entries_(i, j) = value;
        }
    return m;
}

OperatorMatrix OperatorMatrix::from_entries(const Space& s, Eigen::MatrixXd entries) {
    if (entries.rows() != s.size() || entries.cols() != s.size())
        throw ConfigError("entry matrix does not match the space size");
    for (int i = 0; i < s.size(); ++i)
        if (entries(i, i) != 0.0) throw ConfigError("operator matrix must have a zero diagonal");
    OperatorMatrix m;
    m.space_ = &s;
    m.kernel_.kind = KernelKind::zero;
    m.synthetic_ = true;
    m.entries_ = std::move(entries);
    return m;
}

std::vector<double> OperatorMatrix::apply_forward(const std::vector<double>& f,
                                                  const Measure& u) const {
    const int n = space_->size();
    if (static_cast<int>(f.size()) != n || static_cast<int>(u.atoms.size()) != n)
        throw ConfigError("apply_forward dimension mismatch");
    Eigen::VectorXd fu(n);
    for (int j = 0; j < n; ++j) fu[j] = f[j] * u.atoms[j];
    const Eigen::VectorXd out = entries_ * fu;
    return {out.data(), out.data() + n};
}

std::vector<double> OperatorMatrix::apply_adjoint(const std::vector<double>& g,
                                                  const Measure& v) const {
    const int n = space_->size();
    if (static_cast<int>(g.size()) != n || static_cast<int>(v.atoms.size()) != n)
        throw ConfigError("apply_adjoint dimension mismatch");
    Eigen::VectorXd gv(n);
    for (int i = 0; i < n; ++i) gv[i] = g[i] * v.atoms[i];
    const Eigen::VectorXd out = entries_.transpose() * gv;
    return {out.data(), out.data() + n};
}

double OperatorMatrix::positional(int i, int j) const {
    if (!synthetic_ && kernel_.kind == KernelKind::power) return std::abs(entries_(i, j));
    return entries_(i, j);
}

KernelValidation OperatorMatrix::validate_bounds(long max_pairs, long max_triples) const {
    const Space& s = *space_;
    const int n = s.size();
    KernelValidation report;
    if (n < 2) return report;

    const auto size_term = [&](int i, int j) {
        const double k = std::abs(entries_(i, j));
        if (k == 0.0) return 0.0;
        return k * s.volume_V(i, j);
    };
    const long total_pairs = static_cast<long>(n) * (n - 1);
    if (total_pairs <= max_pairs) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                report.size_constant = std::max(report.size_constant, size_term(i, j));
                ++report.pairs_checked;
            }
    } else {
        Rng rng = Rng::stream(1, "kernel-size");
        for (long t = 0; t < max_pairs; ++t) {
            const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
            if (j >= i) ++j;
            report.size_constant = std::max(report.size_constant, size_term(i, j));
            ++report.pairs_checked;
        }
    }

    const double half = 1.0 / (2.0 * s.a0());
    const auto smooth_term = [&](int i, int ip, int j) -> double {
        const double dxx = s.dist(i, ip);
        const double dxy = s.dist(i, j);
        if (!(dxx > 0.0) || !(dxy > 0.0) || dxx > half * dxy) return -1.0;
        const double diff = std::abs(positional(i, j) - positional(ip, j));
        if (diff == 0.0) return 0.0;
        return diff * s.volume_V(i, j) * std::pow(dxy / dxx, kernel_.kappa);
    };
    const long total_triples = static_cast<long>(n) * (n - 1) * (n - 2);
    if (total_triples <= max_triples) {
        for (int i = 0; i < n; ++i)
            for (int ip = 0; ip < n; ++ip)
                for (int j = 0; j < n; ++j) {
                    if (i == ip || i == j || ip == j) continue;
                    const double q = smooth_term(i, ip, j);
                    if (q < 0.0) continue;
                    report.smoothness_constant = std::max(report.smoothness_constant, q);
                    ++report.triples_checked;
                }
    } else {
        Rng rng = Rng::stream(1, "kernel-smooth");
        for (long t = 0; t < max_triples; ++t) {
            const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            const int ip = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            if (i == ip || i == j || ip == j) continue;
            const double q = smooth_term(i, ip, j);
            if (q < 0.0) continue;
            report.smoothness_constant = std::max(report.smoothness_constant, q);
            ++report.triples_checked;
        }
    }
    return report;
}

}  // namespace hartlab
