#ifndef RADLOC_COCYCLE_HPP
#define RADLOC_COCYCLE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "radloc/model.hpp"

namespace radloc {

// Real 2x2 matrix. All transfer operations keep |det - 1| <= 1e-9 * n.
struct Mat2 {
    double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;

    static Mat2 identity() { return {}; }
    static Mat2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

    double det() const { return a11 * a22 - a12 * a21; }
    double trace() const { return a11 + a22; }
    double frob() const {
        return std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22);
    }
    // Operator 2-norm from the closed-form singular values.
    double norm2() const;

    Mat2 operator*(const Mat2& o) const {
        return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
                a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
    }
    Mat2 operator-(const Mat2& o) const {
        return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22};
    }
    Mat2 operator+(const Mat2& o) const {
        return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
    }
    Mat2 scaled(double c) const { return {c * a11, c * a12, c * a21, c * a22}; }
    Mat2 inverse() const;

    void apply(double& x, double& y) const {
        const double nx = a11 * x + a12 * y;
        const double ny = a21 * x + a22 * y;
        x = nx;
        y = ny;
    }
};

// Product accumulator that factors out the norm once entries grow past
// 1e280, so long products never overflow. Actual matrix = m * exp(logScale).
struct ScaledMat2 {
    Mat2 m = Mat2::identity();
    double logScale = 0.0;

    void premultiply(const Mat2& step) {
        m = step * m;
        const double a = std::max(std::max(std::abs(m.a11), std::abs(m.a12)),
                                  std::max(std::abs(m.a21), std::abs(m.a22)));
        if (a > 1e140 || (a < 1e-140 && a > 0.0)) rescale();
    }
    void rescale() {
        const double a = std::max(std::max(std::abs(m.a11), std::abs(m.a12)),
                                  std::max(std::abs(m.a21), std::abs(m.a22)));
        if (a > 0.0) {
            m = m.scaled(1.0 / a);
            logScale += std::log(a);
        }
    }
    double logNorm2() const { return std::log(m.norm2()) + logScale; }
    // Dense value; may overflow for long hyperbolic products.
    Mat2 dense() const { return m.scaled(std::exp(logScale)); }
};

enum class StepKind { continuumKirchhoff, discreteJacobi };

// Edge propagation block [[c, s], [-E s, c]] with c = cos(sqrt(E) x),
// s = sin(sqrt(E) x)/sqrt(E), continued through E <= 0. det = 1 exactly.
Mat2 rotation_block(double E, double ell);

// Generalized cosine/sine solutions at energy E: c(E,x), s(E,x).
double cE(double E, double x);
double sE(double E, double x);

// D(b) S(q) R(E, ell): one continuum edge followed by its vertex.
Mat2 continuum_step(double E, const SiteParams& site);

// (1/alpha)[[E - beta, -1], [alpha^2, 0]] with alpha = sqrt(b) p,
// beta = (b p + prevP) q. The site's ell field carries p.
Mat2 discrete_step(double E, const SiteParams& site, double prevP);

struct OneStepMap {
    StepKind kind = StepKind::continuumKirchhoff;
    Mat2 operator()(double E, const SiteParams& site, double prevP) const {
        return kind == StepKind::continuumKirchhoff ? continuum_step(E, site)
                                                    : discrete_step(E, site, prevP);
    }
    static OneStepMap continuum() { return {StepKind::continuumKirchhoff}; }
    static OneStepMap discrete() { return {StepKind::discreteJacobi}; }
};

// Ordered product M(last)...M(first) over the word, log-scaled.
// For the discrete map, step j receives prevP from step j-1 (0 initially).
ScaledMat2 transfer_product(double E, const EnvironmentWord& word,
                            const OneStepMap& map);

struct LyapunovEstimate {
    double energy = 0.0;
    double value = 0.0;   // per step
    double stderr_ = 0.0;
    int n = 0;
    int trials = 0;
    std::uint64_t seed = 0;
};

LyapunovEstimate lyapunov_mc(double E, const SingleGenDistribution& dist,
                             const OneStepMap& map, int n, int trials,
                             std::uint64_t seed);

std::vector<LyapunovEstimate> lyapunov_curve(const std::vector<double>& grid,
                                             const SingleGenDistribution& dist,
                                             const OneStepMap& map, int n,
                                             int trials, std::uint64_t seed);

// Per-unit-length rate L / <ell>.
double continuum_rate(double L, const SingleGenDistribution& dist);

struct LipschitzProbe {
    double lhs = 0.0;
    double bound = 0.0;
};

// ||M_n(E1, w1) - M_n(E2, w2)|| against the telescoping bound
// C n rho^{n-1} (|E1-E2| + ||w1-w2||_inf).
LipschitzProbe lipschitz_probe(double E1, double E2,
                               const EnvironmentWord& word1,
                               const EnvironmentWord& word2,
                               const OneStepMap& map);

struct LdtOptions {
    int referenceLengthFactor = 10;  // reference n = factor * max(nGrid)
    int referenceTrialsFactor = 4;
};

// Empirical deviation probabilities P(|Lhat - F_n| >= eps) per n.
std::vector<std::pair<int, double>> ldt_empirical(
    double E, const SingleGenDistribution& dist, const OneStepMap& map,
    double eps, const std::vector<int>& nGrid, int trials, std::uint64_t seed,
    const LdtOptions& opts = {});

struct AvalancheReport {
    bool hypothesesHold = false;
    double lhs = 0.0;
    double rhs = 0.0;
};

AvalancheReport avalanche_check(const std::vector<Mat2>& blocks, double lambda,
                                double apConstant = 10.0);

// Least-squares line fit; returns (slope, intercept, rSquared).
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rSquared = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace radloc

#endif
