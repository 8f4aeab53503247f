#include "radloc/cocycle.hpp"

#include <algorithm>
#include <stdexcept>

namespace radloc {

double Mat2::norm2() const {
    // sigma_max^2 = (f + sqrt(f^2 - 4 det^2)) / 2 with f the squared
    // Frobenius norm; entries are pre-normalized so f^2 cannot overflow.
    const double a = std::max(std::max(std::abs(a11), std::abs(a12)),
                              std::max(std::abs(a21), std::abs(a22)));
    if (a == 0.0) return 0.0;
    const double x11 = a11 / a, x12 = a12 / a, x21 = a21 / a, x22 = a22 / a;
    const double f = x11 * x11 + x12 * x12 + x21 * x21 + x22 * x22;
    const double d = x11 * x22 - x12 * x21;
    const double disc = std::max(0.0, f * f - 4.0 * d * d);
    return a * std::sqrt(0.5 * (f + std::sqrt(disc)));
}

Mat2 Mat2::inverse() const {
    const double d = det();
    if (d == 0.0) throw std::domain_error("Mat2::inverse: singular matrix");
    return {a22 / d, -a12 / d, -a21 / d, a11 / d};
}

double cE(double E, double x) {
    const double z = E * x * x;
    if (std::abs(z) < 1e-8) {
        // c = 1 - z/2 + z^2/24 - z^3/720
        return 1.0 + z * (-0.5 + z * (1.0 / 24.0 - z / 720.0));
    }
    if (E > 0.0) return std::cos(std::sqrt(E) * x);
    return std::cosh(std::sqrt(-E) * x);
}

double sE(double E, double x) {
    const double z = E * x * x;
    if (std::abs(z) < 1e-8) {
        // s = x (1 - z/6 + z^2/120 - z^3/5040)
        return x * (1.0 + z * (-1.0 / 6.0 + z * (1.0 / 120.0 - z / 5040.0)));
    }
    if (E > 0.0) {
        const double r = std::sqrt(E);
        return std::sin(r * x) / r;
    }
    const double r = std::sqrt(-E);
    return std::sinh(r * x) / r;
}

Mat2 rotation_block(double E, double ell) {
    if (!(ell > 0.0)) throw std::invalid_argument("rotation_block: ell must be > 0");
    const double c = cE(E, ell);
    const double s = sE(E, ell);
    Mat2 m{c, s, -E * s, c};
    if (E < 0.0 && c > 0.5) {
        // cosh^2 - sinh^2 cancels in doubles once the entries are large;
        // pin the determinant at 1 with a sub-ulp correction of a22.
        m.a22 = (1.0 - E * s * s) / c;
    }
    return m;
}

Mat2 continuum_step(double E, const SiteParams& site) {
    if (site.b < 1) throw std::invalid_argument("continuum_step: b must be >= 1");
    const Mat2 r = rotation_block(E, site.ell);
    const double sb = std::sqrt(static_cast<double>(site.b));
    // D(b) S(q) applied to r: row1 *= sqrt(b); row2 = (q*row1 + row2)/sqrt(b).
    return {sb * r.a11, sb * r.a12, (site.q * r.a11 + r.a21) / sb,
            (site.q * r.a12 + r.a22) / sb};
}

Mat2 discrete_step(double E, const SiteParams& site, double prevP) {
    const double p = site.ell;
    if (!(p > 0.0)) throw std::invalid_argument("discrete_step: hopping must be > 0");
    if (prevP < 0.0) throw std::invalid_argument("discrete_step: prevP must be >= 0");
    const double alpha = std::sqrt(static_cast<double>(site.b)) * p;
    if (alpha == 0.0) throw std::invalid_argument("discrete_step: alpha = 0");
    const double beta = (site.b * p + prevP) * site.q;
    return {(E - beta) / alpha, -1.0 / alpha, alpha, 0.0};
}

ScaledMat2 transfer_product(double E, const EnvironmentWord& word,
                            const OneStepMap& map) {
    ScaledMat2 acc;
    double prevP = 0.0;
    for (std::size_t j = 0; j < word.size(); ++j) {
        acc.premultiply(map(E, word.params[j], prevP));
        prevP = word.params[j].ell;
    }
    return acc;
}

namespace {

// One trial of the cocycle: (1/n) log||M_n|| with a freshly sampled word.
double trial_log_growth(double E, const SingleGenDistribution& dist,
                        const OneStepMap& map, int n, std::uint64_t trialSeed) {
    Rng rng(trialSeed);
    ScaledMat2 acc;
    double prevP = 0.0;
    if (map.kind == StepKind::discreteJacobi) {
        // Stationary start: the first step sees a sampled predecessor weight.
        prevP = dist.pick(rng.next_double()).ell;
    }
    for (int j = 0; j < n; ++j) {
        const SiteParams& s = dist.pick(rng.next_double());
        acc.premultiply(map(E, s, prevP));
        prevP = s.ell;
    }
    return acc.logNorm2() / static_cast<double>(n);
}

}  // namespace

LyapunovEstimate lyapunov_mc(double E, const SingleGenDistribution& dist,
                             const OneStepMap& map, int n, int trials,
                             std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("lyapunov_mc: n must be >= 1");
    if (trials < 2) throw std::invalid_argument("lyapunov_mc: trials must be >= 2");
    double sum = 0.0, sumsq = 0.0;
    for (int t = 0; t < trials; ++t) {
        const double v =
            trial_log_growth(E, dist, map, n, substream_seed(seed, t));
        sum += v;
        sumsq += v * v;
    }
    LyapunovEstimate est;
    est.energy = E;
    est.n = n;
    est.trials = trials;
    est.seed = seed;
    est.value = sum / trials;
    const double var =
        std::max(0.0, (sumsq - sum * sum / trials) / (trials - 1));
    est.stderr_ = std::sqrt(var / trials);
    return est;
}

std::vector<LyapunovEstimate> lyapunov_curve(const std::vector<double>& grid,
                                             const SingleGenDistribution& dist,
                                             const OneStepMap& map, int n,
                                             int trials, std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("lyapunov_curve: empty grid");
    std::vector<LyapunovEstimate> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        out[i] = lyapunov_mc(grid[i], dist, map, n, trials,
                             substream_seed(seed, 0x10000 + i));
    return out;
}

double continuum_rate(double L, const SingleGenDistribution& dist) {
    if (L < 0.0) throw std::invalid_argument("continuum_rate: L must be >= 0");
    return L / dist.mean_length();
}

LipschitzProbe lipschitz_probe(double E1, double E2,
                               const EnvironmentWord& word1,
                               const EnvironmentWord& word2,
                               const OneStepMap& map) {
    if (word1.size() != word2.size())
        throw std::invalid_argument("lipschitz_probe: word length mismatch");
    const std::size_t n = word1.size();
    // ||w1 - w2||_inf over the parameter box.
    double dOmega = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        dOmega = std::max(dOmega, std::abs(static_cast<double>(
                                      word1.params[j].b - word2.params[j].b)));
        dOmega = std::max(dOmega, std::abs(word1.params[j].ell - word2.params[j].ell));
        dOmega = std::max(dOmega, std::abs(word1.params[j].q - word2.params[j].q));
    }
    const double delta = std::abs(E1 - E2) + dOmega;

    double rho = 0.0;     // max one-step norm over both words and energies
    double oneStepC = 0.0;  // observed one-step Lipschitz ratio
    double prevP1 = 0.0, prevP2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Mat2 m1 = map(E1, word1.params[j], prevP1);
        const Mat2 m2 = map(E2, word2.params[j], prevP2);
        const Mat2 m1b = map(E2, word1.params[j], prevP1);
        rho = std::max({rho, m1.norm2(), m2.norm2(), m1b.norm2()});
        if (delta > 0.0)
            oneStepC = std::max(oneStepC, (m1 - m2).norm2() / delta);
        prevP1 = word1.params[j].ell;
        prevP2 = word2.params[j].ell;
    }

    LipschitzProbe probe;
    const ScaledMat2 p1 = transfer_product(E1, word1, map);
    const ScaledMat2 p2 = transfer_product(E2, word2, map);
    probe.lhs = (p1.dense() - p2.dense()).norm2();
    probe.bound = (delta == 0.0)
                      ? 0.0
                      : oneStepC * static_cast<double>(n) *
                            std::pow(rho, static_cast<double>(n) - 1.0) * delta;
    return probe;
}

std::vector<std::pair<int, double>> ldt_empirical(
    double E, const SingleGenDistribution& dist, const OneStepMap& map,
    double eps, const std::vector<int>& nGrid, int trials, std::uint64_t seed,
    const LdtOptions& opts) {
    if (!(eps > 0.0)) throw std::invalid_argument("ldt_empirical: eps must be > 0");
    if (trials < 100)
        throw std::invalid_argument("ldt_empirical: trials must be >= 100");
    int nMax = 0;
    for (int n : nGrid) nMax = std::max(nMax, n);
    const LyapunovEstimate ref =
        lyapunov_mc(E, dist, map, opts.referenceLengthFactor * nMax,
                    opts.referenceTrialsFactor * trials,
                    substream_seed(seed, 0xFEEDULL));
    std::vector<std::pair<int, double>> out;
    out.reserve(nGrid.size());
    for (std::size_t gi = 0; gi < nGrid.size(); ++gi) {
        const int n = nGrid[gi];
        int deviations = 0;
        for (int t = 0; t < trials; ++t) {
            const double f = trial_log_growth(
                E, dist, map, n, substream_seed(seed, (gi + 1) * 1000003ULL + t));
            if (std::abs(ref.value - f) >= eps) ++deviations;
        }
        out.emplace_back(n, static_cast<double>(deviations) / trials);
    }
    return out;
}

AvalancheReport avalanche_check(const std::vector<Mat2>& blocks, double lambda,
                                double apConstant) {
    const std::size_t n = blocks.size();
    if (n < 3) throw std::invalid_argument("avalanche_check: need >= 3 blocks");
    AvalancheReport rep;

    std::vector<double> logNorms(n);
    double minNorm = 1e308;
    for (std::size_t j = 0; j < n; ++j) {
        const double nm = blocks[j].norm2();
        logNorms[j] = std::log(nm);
        minNorm = std::min(minNorm, nm);
    }
    bool hyp = minNorm >= lambda && lambda > static_cast<double>(n);
    double pairSum = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double lp = std::log((blocks[j + 1] * blocks[j]).norm2());
        pairSum += lp;
        if (std::abs(logNorms[j + 1] + logNorms[j] - lp) >=
            0.5 * std::log(lambda))
            hyp = false;
    }
    rep.hypothesesHold = hyp;

    ScaledMat2 full;
    for (std::size_t j = 0; j < n; ++j) full.premultiply(blocks[j]);
    double midSum = 0.0;
    for (std::size_t j = 1; j + 1 < n; ++j) midSum += logNorms[j];
    rep.lhs = std::abs(full.logNorm2() + midSum - pairSum);
    rep.rhs = apConstant * static_cast<double>(n) / lambda;
    return rep;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need >= 2 matched points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    LineFit f;
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    double ssRes = 0.0, ssTot = 0.0;
    const double ybar = sy / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double pred = f.slope * x[i] + f.intercept;
        ssRes += (y[i] - pred) * (y[i] - pred);
        ssTot += (y[i] - ybar) * (y[i] - ybar);
    }
    f.rSquared = (ssTot == 0.0) ? 1.0 : 1.0 - ssRes / ssTot;
    return f;
}

}  // namespace radloc
