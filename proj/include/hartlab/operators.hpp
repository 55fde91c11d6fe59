#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hartlab/space.hpp"

namespace hartlab {

enum class KernelKind { zero, hilbert1d, riesz, power };

// Discretized Calderon-Zygmund kernel.  kappa is the Holder exponent of the
// smoothness bound; d_exp the Riesz homogeneity ((x_c - y_c)/d(x,y)^{d_exp+1});
// component selects the Riesz coordinate.  The power kind is the alternating
// sign kernel s_i s_j / V(x_i, x_j) with s_i = (-1)^i.
struct Kernel {
    KernelKind kind = KernelKind::hilbert1d;
    double kappa = 1.0;
    double d_exp = 1.0;
    int component = 0;

    void validate(const Space& s) const;
};

// Measured constants of the two kernel bounds:
//   size_constant       = max over pairs of |K(x,y)| * V(x,y)
//   smoothness_constant = max over triples with d(x,x') <= d(x,y)/(2 a0) of
//                         |K(x,y) - K(x',y)| * V(x,y) * (d(x,y)/d(x,x'))^kappa
// For the power kind the smoothness quotient uses the positional part 1/V;
// the alternating sign is a diagonal modulation, not a property of positions.
struct KernelValidation {
    double size_constant = 0.0;
    double smoothness_constant = 0.0;
    long pairs_checked = 0;
    long triples_checked = 0;
};

// Dense matrix of kernel values K(x_i, x_j), zero on the diagonal (truncation
// at the resolution scale).  Immutable once built.
class OperatorMatrix {
public:
    static OperatorMatrix assemble(const Space& s, const Kernel& k);
    // Explicit entries for synthetic scenarios; requires a zero diagonal.
    static OperatorMatrix from_entries(const Space& s, Eigen::MatrixXd entries);

    const Eigen::MatrixXd& entries() const { return entries_; }
    const Space& space() const { return *space_; }
    const Kernel& kernel() const { return kernel_; }
    bool synthetic() const { return synthetic_; }

    // (T(fu))(x_i) = sum_{j != i} K(x_i,x_j) f_j u_j.
    std::vector<double> apply_forward(const std::vector<double>& f, const Measure& u) const;
    // Transposed kernel: (T*(gv))(x_j) = sum_{i != j} K(x_i,x_j) g_i v_i.
    std::vector<double> apply_adjoint(const std::vector<double>& g, const Measure& v) const;

    // Sweeps pairs/triples (all of them up to the caps, then a fixed-seed
    // sample) and reports the measured bound constants.
    KernelValidation validate_bounds(long max_pairs = 200000, long max_triples = 200000) const;

private:
    OperatorMatrix() = default;
    double positional(int i, int j) const;  // entry without the index-sign factor

    const Space* space_ = nullptr;
    Kernel kernel_;
    bool synthetic_ = false;
    Eigen::MatrixXd entries_;
};

}  // namespace hartlab
