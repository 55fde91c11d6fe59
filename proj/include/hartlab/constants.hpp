#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hartlab/dyadic.hpp"
#include "hartlab/haar.hpp"
#include "hartlab/operators.hpp"

namespace hartlab {

// Parameters of the two-weight inequality; sigma0 = lambda(n+kappa) - kappa
// must be negative, which pins lambda below kappa/(n+kappa).
struct TwoWeightParams {
    double kappa = 1.0;
    double n_dim = 1.0;
    double lambda = 0.2;

    double sigma0() const { return lambda * (n_dim + kappa) - kappa; }
    double gamma_decay() const { return -sigma0(); }
    void validate() const;
};

// K(Q,w) = sum_y (l(Q)/(l(Q)+dist(y,Q)))^kappa * w_y / mu(B(x_Q, l(Q)+dist(y,Q))).
// The restricted overload sums only over `support` (the measure 1_E w).
double poisson_K(const DyadicSystem& d, int cube_id, const Measure& w, double kappa);
double poisson_K(const DyadicSystem& d, int cube_id, const Measure& w, double kappa,
                 const std::vector<std::int32_t>& support);

// P(w,I) = sum_y |I|/(|I|+dist(y,I))^2 * w_y; 1D spaces only.
double classical_poisson_1d(const DyadicSystem& d, int cube_id, const Measure& w);

struct DualPair {
    double forward = 0.0;
    double dual = 0.0;
    std::int32_t argmax_forward = -1;  // cube ids
    std::int32_t argmax_dual = -1;

    double pooled() const { return forward > dual ? forward : dual; }
};

// forward = max over cubes of sqrt(u(Q) K(Q,v) / l(Q)^n); dual swaps u and v.
DualPair a2_constant(const DyadicSystem& d, const Measure& u, const Measure& v,
                     const TwoWeightParams& params);

// forward = max over cubes with u(Q)>0 of ||1_Q T(u 1_Q)||_{L2(v)} / u(Q)^{1/2};
// dual uses the transposed kernel with u and v swapped.
DualPair testing_constant(const DyadicSystem& d, const OperatorMatrix& m, const Measure& u,
                          const Measure& v);

enum class PsiMode { include_self, proper };

struct PsiOptions {
    PsiMode mode = PsiMode::include_self;
    // Optional r-goodness filter on subpartition members: a cube contributes
    // its Phi only when r-good against its own system and, when supplied,
    // against `independent` as well.
    bool filter = false;
    const DyadicSystem* independent = nullptr;
    int good_r = 1;
    double good_eps = 0.5;
};

// Phi(Q, 1_E u) = v(Q) * K(Q, 1_E u)^2.
double pivotal_phi(const DyadicSystem& d, int cube_id, const std::vector<std::int32_t>& e_set,
                   const Measure& u, const Measure& v, const TwoWeightParams& params);

// Exact sup over dyadic subpartitions of Q via the tree recursion
// Psi(Q) = max(Phi(Q)*[filter], sum over children of Psi); proper mode drops
// the trivial partition {Q} at the top (0 when Q has no children).
double pivotal_psi(const DyadicSystem& d, int cube_id, const std::vector<std::int32_t>& e_set,
                   const Measure& u, const Measure& v, const TwoWeightParams& params,
                   const PsiOptions& opts = {});

// forward = max over cubes with u(Q)>0 of sqrt(Psi(Q, members(Q)) / u(Q)).
DualPair pivotal_constant(const DyadicSystem& d, const Measure& u, const Measure& v,
                          const TwoWeightParams& params, const PsiOptions& opts = {});

enum class NormMethod { automatic, svd, power };

struct OperatorNorm {
    double value = 0.0;
    double lower = 0.0;  // certified Rayleigh bracket (coincides with value for svd)
    double upper = 0.0;
    std::string method;
    int iterations = 0;
};

// Largest singular value of B(i,j) = sqrt(v_i) K(x_i,x_j) sqrt(u_j): dense SVD
// up to 1024 points, power iteration on B^T B beyond (or on request).
OperatorNorm operator_norm(const OperatorMatrix& m, const Measure& u, const Measure& v,
                           NormMethod method = NormMethod::automatic);

struct CarlesonBounds {
    double c_embed = 0.0;
    double c_carleson = 0.0;
    std::int32_t argmax_cube = -1;
};

// c_carleson = max over cubes S of sum_{Q subset S} a_Q / u(S) (tree sweep);
// c_embed = largest eigenvalue of f -> sum_Q a_Q (avg_Q^u f)^2 on L2(u).
CarlesonBounds carleson_embedding(const DyadicSystem& d, const Measure& u,
                                  const std::vector<double>& a);

struct MeasuredConstant {
    double value = 0.0;
    long samples = 0;  // samples that entered the max
};

// Empirical constant of |<T(u 1_{Qhat \ Q'}), H_S>_v| <= ||H_S|| Phi(S, 1_{Qhat \ Q'} u)^{1/2}
// over triples S < Q' < Qhat with dist(S, X\Q') >= l(S).
MeasuredConstant offsupport_ratio(const DyadicSystem& d, const OperatorMatrix& m,
                                  const HaarBasis& basis_v, const Measure& u, const Measure& v,
                                  const TwoWeightParams& params, int samples, std::uint64_t seed);

// Empirical constant of l(S)^{sigma0} K(S, 1_{Qhat\Q} u) <= C l(Q)^{sigma0} K(Q, 1_{Qhat\Q} u)
// over triples S < Q < Qhat with dist(S, boundary(Q) + center(Q)) >= l(S)^lambda l(Q)^{1-lambda}/2.
MeasuredConstant decay_ratio(const DyadicSystem& d, const Measure& u,
                             const TwoWeightParams& params, int samples, std::uint64_t seed);

// max over rho-close pairs (Q in du, S in dv) of |int_S T(u 1_Q) dv| / sqrt(u(Q) v(S));
// rho-close: delta^rho <= l(Q)/l(S) <= delta^{-rho} and dist(Q,S) <= max side.
MeasuredConstant weak_boundedness(const DyadicSystem& du, const DyadicSystem& dv,
                                  const OperatorMatrix& m, const Measure& u, const Measure& v,
                                  int rho);

struct ArgMax {
    int grid = -1;
    std::int32_t cube = -1;
};

struct GridConstants {
    std::uint64_t seed = 0;
    DualPair a2, testing, pivotal;
};

struct ConstantsReport {
    double a2 = 0.0, a2_dual = 0.0;
    double testing = 0.0, testing_dual = 0.0;
    double pivotal = 0.0, pivotal_dual = 0.0;
    double norm = 0.0;
    double ratio = 0.0;  // norm / (max(a2) + max(testing) + max(pivotal))
    bool common_atom = false;
    std::string truncation = "diagonal-excluded";
    std::string psi_mode = "include-self";
    ArgMax where_a2, where_a2_dual, where_testing, where_testing_dual, where_pivotal,
        where_pivotal_dual;
    std::vector<GridConstants> per_grid;
};

// Pools the per-grid maxima of a2/testing/pivotal over the sampled systems and
// attaches the (grid-free) operator norm.
ConstantsReport compute_constants(const std::vector<const DyadicSystem*>& grids,
                                  const OperatorMatrix& m, const Measure& u, const Measure& v,
                                  const TwoWeightParams& params, const PsiOptions& opts = {});

}  // namespace hartlab
