#ifndef RADLOC_DISCRETE_HPP
#define RADLOC_DISCRETE_HPP

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "radloc/cocycle.hpp"
#include "radloc/furstenberg.hpp"
#include "radloc/model.hpp"

namespace radloc {

// Symmetric tridiagonal block: diag beta_j, offdiag alpha_j > 0.
struct JacobiMatrix {
    std::vector<double> diag;
    std::vector<double> offdiag;

    std::size_t size() const { return diag.size(); }
    Eigen::MatrixXd dense() const;
    std::vector<double> eigenvalues() const;
};

// Rooted radial tree truncated at a given depth. Generation g vertices all
// have c_g children; c_0 is the root branching, c_g = word[g].b for g >= 1.
struct FiniteTree {
    std::size_t depth = 0;
    std::vector<int> childCounts;        // c_g for g = 0..depth-1
    std::vector<long long> genCounts;    // vertices per generation, 0..depth
    std::vector<int> parent;             // -1 at the root
    std::vector<std::vector<int>> children;
    std::vector<int> generation;

    std::size_t vertexCount() const { return parent.size(); }
};

FiniteTree build_finite_tree(const EnvironmentWord& word, std::size_t depth,
                             int rootBranching = 0);

enum class TreeRegime { adjacency, schroedinger };

// Adjacency: (Af)(u) = -sum_{v~u} p(u,v) f(v), p radial with p(u,v) =
// p_{min(gen u, gen v)}. Schroedinger: (Sf)(u) = sum_{v~u} (q(u) f(u) - f(v)).
Eigen::MatrixXd dense_operator(const FiniteTree& tree,
                               const EnvironmentWord& word, TreeRegime regime);

// Orthonormal family reducing the radial tree operator to Jacobi blocks.
struct BreuerBasis {
    struct Chain {
        std::size_t startGen = 0;  // n: chain occupies generations n..depth
        std::vector<Eigen::VectorXd> vectors;  // phi_{n,k,j}, j = 0..len-1
    };
    std::vector<Chain> chains;

    std::size_t totalVectors() const;
    Eigen::MatrixXd as_matrix(std::size_t dim) const;
};

BreuerBasis breuer_basis(const FiniteTree& tree, const EnvironmentWord& word);

// Half-line Jacobi entries with the generation shift: alpha_j = sqrt(b_j) p_j,
// beta_j = (b_j p_j + p_{j-1}) q_j, p_{-1} = 0, indices starting at startGen.
JacobiMatrix jacobi_from_word(const EnvironmentWord& word, std::size_t startGen,
                              std::size_t size);

// Same, but the last diagonal drops the children term (the truncation has no
// generation beyond the last row).
JacobiMatrix truncated_jacobi_block(const EnvironmentWord& word,
                                    std::size_t startGen, std::size_t size,
                                    TreeRegime regime);

struct EquivalenceReport {
    bool pass = false;
    double maxEigGap = 0.0;
    double conjugationResidual = 0.0;
    std::size_t worstBlock = 0;
    std::string to_json() const;
};

// Certifies that the dense tree operator equals the direct sum of truncated
// Jacobi blocks (sign -J in the adjacency regime), both as an eigenvalue
// multiset and through the explicit basis conjugation.
EquivalenceReport decomposition_equivalence(const FiniteTree& tree,
                                            const EnvironmentWord& word,
                                            TreeRegime regime);

struct DiscreteLocalizationReport {
    double windowCenter = 0.0;
    double lyapunov = 0.0;
    double medianFitRate = 0.0;
    double kernelDecayRate = 0.0;  // theta, off-diagonal kernel decay
    double treeTailSlope = 0.0;    // slope of log tail sums vs radius
    bool ratesAgree = false;       // medianFitRate within 25% of lyapunov
    bool kernelDecays = false;
    bool treeTailDecays = false;
    std::string to_json() const;
};

DiscreteLocalizationReport discrete_localization_suite(
    const SingleGenDistribution& dist, DiscreteRegime regime,
    std::pair<double, double> window, std::size_t depth, int trials,
    std::uint64_t seed);

// Union over periodic words with cell length <= periodLimit of the band sets
// {E in window : |trace of the cell transfer product| <= 2}, merged.
std::vector<std::pair<double, double>> almost_sure_spectrum_discrete(
    const SingleGenDistribution& dist, std::size_t periodLimit,
    std::pair<double, double> window);

std::vector<std::pair<double, double>> periodic_spectrum_continuum(
    const std::vector<SiteParams>& cell, std::pair<double, double> window);

std::string bands_csv(const std::vector<std::pair<double, double>>& bands);

}  // namespace radloc

#endif
