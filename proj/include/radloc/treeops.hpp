#ifndef RADLOC_TREEOPS_HPP
#define RADLOC_TREEOPS_HPP

#include <complex>
#include <string>
#include <vector>

#include "radloc/halfline.hpp"
#include "radloc/model.hpp"

namespace radloc {

// Path of child indices from the root; entry at depth g lies in
// [1, branching of the generation-g vertex].
struct VertexAddress {
    std::vector<int> path;

    std::size_t generation() const { return path.size(); }
    bool is_prefix_of(const VertexAddress& o) const;
    std::string to_string() const;
};

// Lazily evaluated tree function: on branch j of the base vertex, at radial
// distance t, the value is exp(2 pi i j k / b) * f(t) / sqrt(w_v(t)).
struct LiftedFunction {
    VertexAddress base;
    int fourierIndex = 0;
    int baseBranching = 1;  // b at the base vertex
    HalfLineProfile profile;

    std::complex<double> branch_amplitude(int branch) const;
};

LiftedFunction lift(const HalfLineProfile& profile, const VertexAddress& v,
                    int k, const TreeGeometry& geometry);

// Tree value at the generation-g vertex on the given address, approached
// from the parent edge (t_g^-). Zero outside the support.
std::complex<double> lift_vertex_value(const LiftedFunction& fn,
                                       const VertexAddress& v,
                                       const TreeGeometry& geometry);

struct KirchhoffResidual {
    double continuityResidual = 0.0;
    double fluxResidual = 0.0;
    double scale = 0.0;  // max incident value/derivative magnitude
};

KirchhoffResidual kirchhoff_residual(const LiftedFunction& fn,
                                     const VertexAddress& v,
                                     const TreeGeometry& geometry);

struct TreeDecayReport {
    double C = 0.0;
    double lambda = 0.0;
    bool holds = false;
};

// Checks |f(x)| <= C e^{-lambda |x|} / sqrt(w_o(|x|)) by fitting the
// generation-wise maxima of |f| sqrt(w_o) and verifying 5% slack compliance.
TreeDecayReport tree_decay_check(const LiftedFunction& fn,
                                 const TreeGeometry& geometry);

// Decomposition-sum moment bound over all subspaces whose subtree meets the
// support ball of the given radius.
double tree_dynamical_moment(const EnvironmentWord& word, std::size_t depth,
                             std::pair<double, double> window, double p,
                             double compactSupportRadius);

// Exact tree-L2 inner product <f1, f2> on the depth-truncated tree via
// edgewise quadrature (dense enumeration; depth <= 6 intended).
std::complex<double> tree_inner_product(const LiftedFunction& f1,
                                        const LiftedFunction& f2,
                                        const TreeGeometry& geometry,
                                        std::size_t depth);

// CSV rows generation,vertexPath,branchIndex,re,im over the truncated tree.
std::string tree_csv(const LiftedFunction& fn, const TreeGeometry& geometry,
                     std::size_t depth);

}  // namespace radloc

#endif
