#include "hartlab/constants.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hartlab/rng.hpp"

namespace hartlab {

namespace {

double poisson_factor(double l, double dist, double kappa) {
    const double t = l / (l + dist);
    return kappa == 1.0 ? t : std::pow(t, kappa);
}

double poisson_term(const DyadicSystem& d, const Cube& q, int y, double wy, double kappa) {
    const double dist = d.dist_to_cube(y, q.id);
    const double denom = d.space().mu_ball(q.center, q.side + dist);
    if (denom <= 0.0) throw RuntimeFailure("empty base-measure ball in the Poisson kernel");
    return poisson_factor(q.side, dist, kappa) * wy / denom;
}

std::vector<std::int32_t> member_difference(const std::vector<std::int32_t>& outer,
                                            const std::vector<std::int32_t>& inner) {
    std::vector<std::int32_t> out;
    out.reserve(outer.size() - inner.size());
    std::set_difference(outer.begin(), outer.end(), inner.begin(), inner.end(),
                        std::back_inserter(out));
    return out;
}

}  // namespace

void TwoWeightParams::validate() const {
    if (!(kappa > 0.0) || kappa > 1.0) throw ConfigError("kappa must lie in (0,1]");
    if (!(n_dim > 0.0)) throw ConfigError("n_dim must be positive");
    if (!(lambda > 0.0) || !(lambda < kappa / (n_dim + kappa)))
        throw ConfigError("lambda must lie in (0, kappa/(n+kappa))");
}

double poisson_K(const DyadicSystem& d, int cube_id, const Measure& w, double kappa) {
    const Cube& q = d.cube(cube_id);
    double sum = 0.0;
    for (int y = 0; y < d.space().size(); ++y) {
        const double wy = w.atoms[static_cast<std::size_t>(y)];
        if (wy == 0.0) continue;
        sum += poisson_term(d, q, y, wy, kappa);
    }
    return sum;
}

double poisson_K(const DyadicSystem& d, int cube_id, const Measure& w, double kappa,
                 const std::vector<std::int32_t>& support) {
    const Cube& q = d.cube(cube_id);
    double sum = 0.0;
    for (int y : support) {
        const double wy = w.atoms[static_cast<std::size_t>(y)];
        if (wy == 0.0) continue;
        sum += poisson_term(d, q, y, wy, kappa);
    }
    return sum;
}

double classical_poisson_1d(const DyadicSystem& d, int cube_id, const Measure& w) {
    if (d.space().dim() != 1) throw ConfigError("classical Poisson requires a 1D space");
    const Cube& q = d.cube(cube_id);
    double sum = 0.0;
    for (int y = 0; y < d.space().size(); ++y) {
        const double wy = w.atoms[static_cast<std::size_t>(y)];
        if (wy == 0.0) continue;
        const double denom = q.side + d.dist_to_cube(y, cube_id);
        sum += q.side / (denom * denom) * wy;
    }
    return sum;
}

DualPair a2_constant(const DyadicSystem& d, const Measure& u, const Measure& v,
                     const TwoWeightParams& params) {
    params.validate();
    DualPair out;
    for (const Cube& q : d.cubes()) {
        const double ln = std::pow(q.side, params.n_dim);
        const double fwd = std::sqrt(d.weight_of(q.id, u) * poisson_K(d, q.id, v, params.kappa) / ln);
        if (fwd > out.forward) {
            out.forward = fwd;
            out.argmax_forward = q.id;
        }
        const double dual = std::sqrt(d.weight_of(q.id, v) * poisson_K(d, q.id, u, params.kappa) / ln);
        if (dual > out.dual) {
            out.dual = dual;
            out.argmax_dual = q.id;
        }
    }
    return out;
}

DualPair testing_constant(const DyadicSystem& d, const OperatorMatrix& m, const Measure& u,
                          const Measure& v) {
    if (&m.space() != &d.space()) throw ConfigError("operator and system live on different spaces");
    if (u.total() <= 0.0) throw ConfigError("testing constant requires a u-positive cube");
    const Eigen::MatrixXd& K = m.entries();
    DualPair out;
    for (const Cube& q : d.cubes()) {
        const auto& ids = q.members;
        const double uq = d.weight_of(q.id, u);
        if (uq > 0.0) {
            double norm2 = 0.0;
            for (int i : ids) {
                double t = 0.0;
                for (int j : ids) t += K(i, j) * u.atoms[static_cast<std::size_t>(j)];
                norm2 += v.atoms[static_cast<std::size_t>(i)] * t * t;
            }
            const double val = std::sqrt(norm2 / uq);
            if (val > out.forward) {
                out.forward = val;
                out.argmax_forward = q.id;
            }
        }
        const double vq = d.weight_of(q.id, v);
        if (vq > 0.0) {
            double norm2 = 0.0;
            for (int j : ids) {
                double t = 0.0;
                for (int i : ids) t += K(i, j) * v.atoms[static_cast<std::size_t>(i)];
                norm2 += u.atoms[static_cast<std::size_t>(j)] * t * t;
            }
            const double val = std::sqrt(norm2 / vq);
            if (val > out.dual) {
                out.dual = val;
                out.argmax_dual = q.id;
            }
        }
    }
    return out;
}

double pivotal_phi(const DyadicSystem& d, int cube_id, const std::vector<std::int32_t>& e_set,
                   const Measure& u, const Measure& v, const TwoWeightParams& params) {
    const double k = poisson_K(d, cube_id, u, params.kappa, e_set);
    return d.weight_of(cube_id, v) * k * k;
}

namespace {

bool passes_filter(const DyadicSystem& d, int id, const PsiOptions& opts) {
    if (!opts.filter) return true;
    if (!d.is_good(id, d, opts.good_r, opts.good_eps)) return false;
    return !opts.independent || d.is_good(id, *opts.independent, opts.good_r, opts.good_eps);
}

double psi_rec(const DyadicSystem& d, int id, const std::vector<std::int32_t>& e_set,
               const Measure& u, const Measure& v, const TwoWeightParams& params,
               const PsiOptions& opts) {
    const Cube& q = d.cube(id);
    const double phi = passes_filter(d, id, opts) ? pivotal_phi(d, id, e_set, u, v, params) : 0.0;
    if (q.children.empty()) return phi;
    double sum = 0.0;
    for (int c : q.children) sum += psi_rec(d, c, e_set, u, v, params, opts);
    return std::max(phi, sum);
}

}  // namespace

double pivotal_psi(const DyadicSystem& d, int cube_id, const std::vector<std::int32_t>& e_set,
                   const Measure& u, const Measure& v, const TwoWeightParams& params,
                   const PsiOptions& opts) {
    params.validate();
    if (opts.mode == PsiMode::proper) {
        const Cube& q = d.cube(cube_id);
        if (q.children.empty()) return 0.0;  // no partition into strict subcubes
        double sum = 0.0;
        for (int c : q.children) sum += psi_rec(d, c, e_set, u, v, params, opts);
        return sum;
    }
    return psi_rec(d, cube_id, e_set, u, v, params, opts);
}

DualPair pivotal_constant(const DyadicSystem& d, const Measure& u, const Measure& v,
                          const TwoWeightParams& params, const PsiOptions& opts) {
    params.validate();
    if (u.total() <= 0.0) throw ConfigError("pivotal constant requires a u-positive cube");
    DualPair out;
    for (const Cube& q : d.cubes()) {
        const double uq = d.weight_of(q.id, u);
        if (uq > 0.0) {
            const double val = std::sqrt(pivotal_psi(d, q.id, q.members, u, v, params, opts) / uq);
            if (val > out.forward) {
                out.forward = val;
                out.argmax_forward = q.id;
            }
        }
        const double vq = d.weight_of(q.id, v);
        if (vq > 0.0) {
            const double val = std::sqrt(pivotal_psi(d, q.id, q.members, v, u, params, opts) / vq);
            if (val > out.dual) {
                out.dual = val;
                out.argmax_dual = q.id;
            }
        }
    }
    return out;
}

OperatorNorm operator_norm(const OperatorMatrix& m, const Measure& u, const Measure& v,
                           NormMethod method) {
    const int n = m.space().size();
    if (static_cast<int>(u.atoms.size()) != n || static_cast<int>(v.atoms.size()) != n)
        throw ConfigError("operator_norm dimension mismatch");
    Eigen::MatrixXd B = m.entries();
    for (int i = 0; i < n; ++i) B.row(i) *= std::sqrt(v.atoms[static_cast<std::size_t>(i)]);
    for (int j = 0; j < n; ++j) B.col(j) *= std::sqrt(u.atoms[static_cast<std::size_t>(j)]);

    OperatorNorm out;
    if (method == NormMethod::automatic) method = n <= 1024 ? NormMethod::svd : NormMethod::power;
    if (method == NormMethod::svd) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(B);
        out.value = n > 0 ? svd.singularValues()(0) : 0.0;
        out.lower = out.upper = out.value;
        out.method = "svd";
        return out;
    }

    out.method = "power";
    constexpr double kTol = 1e-10;
    constexpr int kMaxIters = 100000;
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n).normalized();
    Rng restart = Rng::stream(0x706f776572u, "power-restart");
    int restarts = 0;
    double rho = 0.0, resid = 0.0;
    for (int iter = 1; iter <= kMaxIters; ++iter) {
        const Eigen::VectorXd z = B.transpose() * (B * x);  // (B^T B) x
        rho = x.dot(z);
        resid = (z - rho * x).norm();
        out.iterations = iter;
        if (z.norm() == 0.0) {
            if (rho == 0.0 && restarts == 0 && x.isApprox(Eigen::VectorXd::Ones(n).normalized())) {
                // The all-ones start may sit in the null space; retry once at random.
                for (int i = 0; i < n; ++i) x[i] = restart.normal();
                if (x.norm() == 0.0) x.setOnes();
                x.normalize();
                ++restarts;
                continue;
            }
            out.value = out.lower = out.upper = 0.0;
            return out;
        }
        if (resid <= kTol * std::max(rho, 1e-300)) {
            out.lower = std::sqrt(std::max(rho, 0.0));
            out.upper = std::sqrt(std::max(rho + resid, 0.0));
            out.value = out.lower;
            return out;
        }
        x = z.normalized();
    }
    std::ostringstream msg;
    msg << "power iteration did not converge: sigma in [" << std::sqrt(std::max(rho - resid, 0.0))
        << ", " << std::sqrt(rho + resid) << "]";
    throw RuntimeFailure(msg.str());
}

CarlesonBounds carleson_embedding(const DyadicSystem& d, const Measure& u,
                                  const std::vector<double>& a) {
    const int nc = d.num_cubes();
    if (static_cast<int>(a.size()) != nc)
        throw ConfigError("coefficient vector must have one entry per cube");
    for (double c : a)
        if (c < 0.0 || !std::isfinite(c)) throw ConfigError("coefficients must be nonnegative");

    std::vector<double> subtree(a);
    for (int k = d.k_max(); k >= d.k_min(); --k)
        for (int id : d.level_cubes(k))
            for (int c : d.cube(id).children) subtree[static_cast<std::size_t>(id)] += subtree[static_cast<std::size_t>(c)];

    CarlesonBounds out;
    std::vector<double> cube_u(static_cast<std::size_t>(nc));
    for (int id = 0; id < nc; ++id) {
        cube_u[static_cast<std::size_t>(id)] = d.weight_of(id, u);
        if (cube_u[static_cast<std::size_t>(id)] <= 0.0) {
            if (subtree[static_cast<std::size_t>(id)] > 0.0)
                throw ConfigError("positive Carleson coefficient on a u-null cube");
            continue;
        }
        const double ratio = subtree[static_cast<std::size_t>(id)] / cube_u[static_cast<std::size_t>(id)];
        if (ratio > out.c_carleson) {
            out.c_carleson = ratio;
            out.argmax_cube = id;
        }
    }

    const int n = d.space().size();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd psi(n);
    for (int id = 0; id < nc; ++id) {
        if (a[static_cast<std::size_t>(id)] <= 0.0) continue;
        psi.setZero();
        const double uq = cube_u[static_cast<std::size_t>(id)];
        for (int i : d.cube(id).members)
            psi[i] = std::sqrt(u.atoms[static_cast<std::size_t>(i)]) / uq;
        M.selfadjointView<Eigen::Lower>().rankUpdate(psi, a[static_cast<std::size_t>(id)]);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw RuntimeFailure("embedding eigensolve failed");
    out.c_embed = std::max(0.0, es.eigenvalues().maxCoeff());
    return out;
}

MeasuredConstant offsupport_ratio(const DyadicSystem& d, const OperatorMatrix& m,
                                  const HaarBasis& basis_v, const Measure& u, const Measure& v,
                                  const TwoWeightParams& params, int samples, std::uint64_t seed) {
    params.validate();
    if (&basis_v.system() != &d) throw ConfigError("Haar basis built on a different system");
    struct Triple {
        std::int32_t s, qp, qhat;
    };
    std::vector<Triple> triples;
    for (const Cube& s : d.cubes()) {
        for (int qp = s.parent; qp >= 0; qp = d.cube(qp).parent) {
            if (d.dist_to_complement_of(s.id, qp) < s.side) continue;
            for (int qh = d.cube(qp).parent; qh >= 0; qh = d.cube(qh).parent)
                triples.push_back({s.id, static_cast<std::int32_t>(qp), static_cast<std::int32_t>(qh)});
        }
    }
    if (triples.empty()) throw RuntimeFailure("no admissible off-support triple in the system");
    if (static_cast<int>(triples.size()) > samples) {
        Rng rng = Rng::stream(seed, "offsupport");
        rng.shuffle(triples);
        triples.resize(static_cast<std::size_t>(samples));
    }

    const Eigen::MatrixXd& K = m.entries();
    MeasuredConstant out;
    for (const Triple& t : triples) {
        const auto& funcs = basis_v.functions(t.s);
        if (funcs.empty()) continue;
        const auto e_set = member_difference(d.cube(t.qhat).members, d.cube(t.qp).members);
        const double kq = poisson_K(d, t.s, u, params.kappa, e_set);
        const double phi = d.weight_of(t.s, v) * kq * kq;
        if (phi <= 0.0) continue;
        const double rhs = std::sqrt(phi);
        for (const HaarFunction& h : funcs) {
            double lhs = 0.0;
            for (int i : d.cube(t.s).members) {
                double ti = 0.0;
                for (int j : e_set) ti += K(i, j) * u.atoms[static_cast<std::size_t>(j)];
                lhs += v.atoms[static_cast<std::size_t>(i)] * basis_v.value(h, i) * ti;
            }
            out.value = std::max(out.value, std::abs(lhs) / rhs);
            ++out.samples;
        }
    }
    return out;
}

MeasuredConstant decay_ratio(const DyadicSystem& d, const Measure& u,
                             const TwoWeightParams& params, int samples, std::uint64_t seed) {
    params.validate();
    struct Triple {
        std::int32_t s, q, qhat;
    };
    std::vector<Triple> triples;
    for (const Cube& s : d.cubes()) {
        for (int q = s.parent; q >= 0; q = d.cube(q).parent) {
            const Cube& qc = d.cube(q);
            const double threshold =
                0.5 * std::pow(s.side, params.lambda) * std::pow(qc.side, 1.0 - params.lambda);
            double dist_e = d.dist_to_complement_of(s.id, q);
            for (int x : s.members) dist_e = std::min(dist_e, d.space().dist(x, qc.center));
            if (dist_e < threshold) continue;
            for (int qh = qc.parent; qh >= 0; qh = d.cube(qh).parent)
                triples.push_back({s.id, static_cast<std::int32_t>(q), static_cast<std::int32_t>(qh)});
        }
    }
    if (triples.empty()) throw RuntimeFailure("no admissible decay triple in the system");
    if (static_cast<int>(triples.size()) > samples) {
        Rng rng = Rng::stream(seed, "decay");
        rng.shuffle(triples);
        triples.resize(static_cast<std::size_t>(samples));
    }

    MeasuredConstant out;
    for (const Triple& t : triples) {
        const auto e_set = member_difference(d.cube(t.qhat).members, d.cube(t.q).members);
        const double kq = poisson_K(d, t.q, u, params.kappa, e_set);
        if (kq <= 0.0) continue;  // u carries no mass on Qhat \ Q
        const double ks = poisson_K(d, t.s, u, params.kappa, e_set);
        const double ratio =
            (ks / kq) * std::pow(d.cube(t.s).side / d.cube(t.q).side, params.sigma0());
        out.value = std::max(out.value, ratio);
        ++out.samples;
    }
    return out;
}

MeasuredConstant weak_boundedness(const DyadicSystem& du, const DyadicSystem& dv,
                                  const OperatorMatrix& m, const Measure& u, const Measure& v,
                                  int rho) {
    if (&du.space() != &dv.space() || &du.space() != &m.space())
        throw ConfigError("weak boundedness requires systems and operator on one space");
    if (rho < 0) throw ConfigError("rho must be nonnegative");
    if (du.params().delta != dv.params().delta)
        throw ConfigError("rho-closeness needs a common delta");

    const Eigen::MatrixXd& K = m.entries();
    MeasuredConstant out;
    long close_pairs = 0;
    for (const Cube& q : du.cubes()) {
        for (const Cube& s : dv.cubes()) {
            if (std::abs(q.level - s.level) > rho) continue;
            if (du.cross_dist_cubes(dv, q.id, s.id) > std::max(q.side, s.side)) continue;
            ++close_pairs;
            const double uq = du.weight_of(q.id, u);
            const double vs = dv.weight_of(s.id, v);
            if (uq <= 0.0 || vs <= 0.0) continue;
            double num = 0.0;
            for (int i : s.members) {
                double ti = 0.0;
                for (int j : q.members) ti += K(i, j) * u.atoms[static_cast<std::size_t>(j)];
                num += v.atoms[static_cast<std::size_t>(i)] * ti;
            }
            out.value = std::max(out.value, std::abs(num) / std::sqrt(uq * vs));
            ++out.samples;
        }
    }
    if (close_pairs == 0) throw RuntimeFailure("no rho-close cube pairs");
    return out;
}

ConstantsReport compute_constants(const std::vector<const DyadicSystem*>& grids,
                                  const OperatorMatrix& m, const Measure& u, const Measure& v,
                                  const TwoWeightParams& params, const PsiOptions& opts) {
    params.validate();
    if (grids.empty()) throw ConfigError("at least one dyadic system is required");
    ConstantsReport rep;
    rep.psi_mode = opts.mode == PsiMode::include_self ? "include-self" : "proper";
    for (int i = 0; i < m.space().size(); ++i)
        if (u.atoms[static_cast<std::size_t>(i)] * v.atoms[static_cast<std::size_t>(i)] > 0.0)
            rep.common_atom = true;

    const auto pool = [](double& slot, ArgMax& where, double val, int grid, std::int32_t cube) {
        if (val > slot) {
            slot = val;
            where = {grid, cube};
        }
    };
    for (int g = 0; g < static_cast<int>(grids.size()); ++g) {
        const DyadicSystem& d = *grids[static_cast<std::size_t>(g)];
        if (&d.space() != &m.space()) throw ConfigError("system built on a different space");
        GridConstants row;
        row.seed = d.seed();
        row.a2 = a2_constant(d, u, v, params);
        row.testing = testing_constant(d, m, u, v);
        row.pivotal = pivotal_constant(d, u, v, params, opts);
        pool(rep.a2, rep.where_a2, row.a2.forward, g, row.a2.argmax_forward);
        pool(rep.a2_dual, rep.where_a2_dual, row.a2.dual, g, row.a2.argmax_dual);
        pool(rep.testing, rep.where_testing, row.testing.forward, g, row.testing.argmax_forward);
        pool(rep.testing_dual, rep.where_testing_dual, row.testing.dual, g,
             row.testing.argmax_dual);
        pool(rep.pivotal, rep.where_pivotal, row.pivotal.forward, g, row.pivotal.argmax_forward);
        pool(rep.pivotal_dual, rep.where_pivotal_dual, row.pivotal.dual, g,
             row.pivotal.argmax_dual);
        rep.per_grid.push_back(std::move(row));
    }
    rep.norm = operator_norm(m, u, v).value;
    const double denom = std::max(rep.a2, rep.a2_dual) + std::max(rep.testing, rep.testing_dual) +
                         std::max(rep.pivotal, rep.pivotal_dual);
    rep.ratio = denom > 0.0 ? rep.norm / denom : 0.0;
    return rep;
}

}  // namespace hartlab
