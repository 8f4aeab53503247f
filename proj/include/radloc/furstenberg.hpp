#ifndef RADLOC_FURSTENBERG_HPP
#define RADLOC_FURSTENBERG_HPP

#include <string>
#include <utility>
#include <vector>

#include "radloc/cocycle.hpp"
#include "radloc/model.hpp"

namespace radloc {

// Commutator analysis of a pair of one-step matrices at a fixed energy.
struct PairAnalysis {
    SiteParams site1, site2;
    double energy = 0.0;
    Mat2 g;  // [M1, M2]
    double detG = 0.0;
    std::pair<double, double> traces;
};

enum class ExceptionalKind {
    continuumRBM,
    continuumRLM,
    continuumGeneric,
    discreteCase1a,
    discreteCase1bi,
    discreteCase1bii,
    discreteCase2,
};

enum class CertificateKind { detGRoot, traceZeroPair, analyticFormula };

struct EnergyCertificate {
    double energy = 0.0;
    CertificateKind kind = CertificateKind::detGRoot;
    double residualDetG = 0.0;  // |det g(energy)| under the reporting pair
};

// Finite candidate set of energies where the group-generation certificate
// fails within a window, with per-energy evidence.
struct ExceptionalSet {
    ExceptionalKind kind = ExceptionalKind::continuumGeneric;
    std::vector<double> energies;  // ascending
    std::vector<EnergyCertificate> certificates;

    std::string to_json() const;
};

enum class DiscreteRegime { schroedinger, adjacency };

PairAnalysis commutator(double E, const SiteParams& s1, const SiteParams& s2,
                        const OneStepMap& map);

// Closed-form [M1, M2] for the equal-branching, zero-coupling pair; the
// off-diagonal entries are (b-1) sE(E, l2-l1) and (b-1)/b * E * sE(E, l2-l1).
Mat2 rlm_commutator_closed_form(double E, int b, double ell1, double ell2);

ExceptionalSet exceptional_set_continuum(const SingleGenDistribution& dist,
                                         std::pair<double, double> window);

ExceptionalSet exceptional_set_discrete(const SingleGenDistribution& dist,
                                        DiscreteRegime regime);

struct EllipticProbe {
    double commNorm = 0.0;
    std::pair<double, double> traces;
    double maxProductNorm = 0.0;
};

EllipticProbe elliptic_boundedness_probe(double E, const SiteParams& s1,
                                         const SiteParams& s2,
                                         const OneStepMap& map, int maxN,
                                         int trials, std::uint64_t seed);

struct ZeroLeReport {
    double e0 = 0.0;
    double maxIdentityResidual = 0.0;  // worst of MjMj=-I, M1M2=R^-1, M2M1=R
    LyapunovEstimate lyapunov;
    bool identitiesHold = false;
    bool lyapunovSmall = false;
};

// Case 1bi block identities at E0 = (b1+1) q1 = (b2+1) q2.
ZeroLeReport zero_le_block_identity(int b1, double q1, int b2, double q2,
                                    std::uint64_t seed = 1);

}  // namespace radloc

#endif
