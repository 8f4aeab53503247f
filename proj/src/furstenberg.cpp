#include "radloc/furstenberg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace radloc {

namespace {

constexpr double kGridStep = 0.01;    // scan resolution in E
constexpr double kRootTol = 1e-10;    // bisection target
constexpr double kDetGTol = 1e-8;     // certificate threshold
constexpr double kMergeTol = 1e-6;    // dedup / intersection matching

double detg_at(double E, const SiteParams& s1, const SiteParams& s2,
               const OneStepMap& map) {
    const Mat2 m1 = map(E, s1, 1.0);
    const Mat2 m2 = map(E, s2, 1.0);
    return (m1 * m2 - m2 * m1).det();
}

double bisect_sign_change(const std::function<double(double)>& f, double lo,
                          double hi) {
    double flo = f(lo);
    for (int i = 0; i < 200 && hi - lo > kRootTol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((flo <= 0.0) == (fm <= 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Golden-section minimization of |f| for even-multiplicity roots.
double minimize_abs(const std::function<double(double)>& f, double lo,
                    double hi) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = std::abs(f(x1)), f2 = std::abs(f(x2));
    for (int i = 0; i < 200 && b - a > kRootTol; ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = std::abs(f(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = std::abs(f(x2));
        }
    }
    return 0.5 * (a + b);
}

// All energies in the window where det g vanishes for one pair: odd roots
// by sign-change bisection, even roots by local minima of |det g| dipping
// below tolerance.
std::vector<double> detg_roots(const SiteParams& s1, const SiteParams& s2,
                               const OneStepMap& map, double lo, double hi) {
    auto f = [&](double E) { return detg_at(E, s1, s2, map); };
    std::vector<double> roots;
    const int nCells = std::max(2, static_cast<int>(std::ceil((hi - lo) / kGridStep)));
    const double h = (hi - lo) / nCells;
    std::vector<double> vals(nCells + 1);
    for (int i = 0; i <= nCells; ++i) vals[i] = f(lo + i * h);
    for (int i = 0; i < nCells; ++i) {
        const double a = lo + i * h, b = a + h;
        if ((vals[i] <= 0.0) != (vals[i + 1] <= 0.0)) {
            roots.push_back(bisect_sign_change(f, a, b));
        } else if (i > 0 && i < nCells &&
                   std::abs(vals[i]) <= std::abs(vals[i - 1]) &&
                   std::abs(vals[i]) <= std::abs(vals[i + 1]) &&
                   std::abs(vals[i]) < 1e-3) {
            double e = minimize_abs(f, lo + (i - 1) * h, lo + (i + 1) * h);
            if (std::abs(f(e)) < kDetGTol) {
                // Even-multiplicity root: sharpen by bisecting the sign
                // change of the derivative (clean signal where |f| is noisy).
                const double fd = 1e-6 * std::max(1.0, std::abs(e));
                auto deriv = [&](double x) { return f(x + fd) - f(x - fd); };
                double dl = e - 1e-4, dr = e + 1e-4;
                if ((deriv(dl) <= 0.0) != (deriv(dr) <= 0.0))
                    e = bisect_sign_change(deriv, dl, dr);
                roots.push_back(e);
            }
        }
    }
    std::sort(roots.begin(), roots.end());
    std::vector<double> out;
    for (double r : roots)
        if (out.empty() || r - out.back() > kMergeTol) out.push_back(r);
    return out;
}

std::vector<double> intersect_sets(const std::vector<std::vector<double>>& sets) {
    if (sets.empty()) return {};
    std::vector<double> acc = sets[0];
    for (std::size_t i = 1; i < sets.size(); ++i) {
        std::vector<double> next;
        for (double e : acc)
            for (double e2 : sets[i])
                if (std::abs(e - e2) < kMergeTol) {
                    next.push_back(e);
                    break;
                }
        acc = std::move(next);
    }
    return acc;
}

}  // namespace

PairAnalysis commutator(double E, const SiteParams& s1, const SiteParams& s2,
                        const OneStepMap& map) {
    if (s1 == s2)
        throw std::invalid_argument("commutator: sites must be distinct");
    PairAnalysis pa;
    pa.site1 = s1;
    pa.site2 = s2;
    pa.energy = E;
    const Mat2 m1 = map(E, s1, 1.0);
    const Mat2 m2 = map(E, s2, 1.0);
    pa.g = m1 * m2 - m2 * m1;
    pa.detG = pa.g.det();
    pa.traces = {m1.trace(), m2.trace()};
    return pa;
}

Mat2 rlm_commutator_closed_form(double E, int b, double ell1, double ell2) {
    if (ell1 == ell2)
        throw std::invalid_argument("rlm_commutator_closed_form: equal lengths");
    const double d = ell2 - ell1;
    const double s = sE(E, d);
    const double bb = static_cast<double>(b);
    return {0.0, (bb - 1.0) * s, (bb - 1.0) / bb * E * s, 0.0};
}

ExceptionalSet exceptional_set_continuum(const SingleGenDistribution& dist,
                                         std::pair<double, double> window) {
    if (!(window.first < window.second))
        throw std::invalid_argument("exceptional_set_continuum: empty window");
    const auto& atoms = dist.atoms();
    const OneStepMap map = OneStepMap::continuum();

    // Classify the support for the known closed forms.
    bool allQZero = true, allSameEll = true, allSameB = true;
    for (const auto& a : atoms) {
        if (a.q != 0.0) allQZero = false;
        if (a.ell != atoms[0].ell) allSameEll = false;
        if (a.b != atoms[0].b) allSameB = false;
    }

    ExceptionalSet set;
    set.kind = allQZero && allSameEll   ? ExceptionalKind::continuumRBM
               : allQZero && allSameB   ? ExceptionalKind::continuumRLM
                                        : ExceptionalKind::continuumGeneric;

    std::vector<std::vector<double>> perPair;
    std::vector<std::pair<std::size_t, std::size_t>> pairIdx;
    for (std::size_t i = 0; i < atoms.size(); ++i)
        for (std::size_t j = i + 1; j < atoms.size(); ++j) {
            if (atoms[i] == atoms[j]) continue;
            perPair.push_back(detg_roots(atoms[i], atoms[j], map, window.first,
                                         window.second));
            pairIdx.emplace_back(i, j);
        }
    if (perPair.empty())
        throw std::invalid_argument("exceptional_set_continuum: needs >= 2 atoms");

    std::vector<double> energies = intersect_sets(perPair);
    std::sort(energies.begin(), energies.end());
    CertificateKind certKind = CertificateKind::detGRoot;

    // Two-atom RBM/RLM: emit the closed-form energies, cross-checked against
    // the bisection scan.
    if (atoms.size() == 2 && set.kind != ExceptionalKind::continuumGeneric) {
        const double scale = set.kind == ExceptionalKind::continuumRBM
                                 ? atoms[0].ell
                                 : std::abs(atoms[0].ell - atoms[1].ell);
        std::vector<double> analytic;
        for (int k = 1;; ++k) {
            const double e = M_PI * M_PI * k * k / (scale * scale);
            if (e >= window.second) break;
            if (e > window.first) analytic.push_back(e);
        }
        bool consistent = analytic.size() == energies.size();
        for (std::size_t i = 0; consistent && i < analytic.size(); ++i)
            consistent = std::abs(analytic[i] - energies[i]) < 1e-6;
        if (consistent) {
            energies = std::move(analytic);
            certKind = CertificateKind::analyticFormula;
        }
    }

    set.energies = energies;
    for (double e : energies) {
        EnergyCertificate c;
        c.energy = e;
        c.kind = certKind;
        double worst = 0.0;
        for (const auto& pi : pairIdx)
            worst = std::max(worst, std::abs(detg_at(e, atoms[pi.first],
                                                     atoms[pi.second], map)));
        c.residualDetG = worst;
        set.certificates.push_back(c);
    }
    return set;
}

ExceptionalSet exceptional_set_discrete(const SingleGenDistribution& dist,
                                        DiscreteRegime regime) {
    const auto& atoms = dist.atoms();
    const OneStepMap map = OneStepMap::discrete();
    ExceptionalSet set;

    if (regime == DiscreteRegime::adjacency) {
        bool haveGoodPair = false;
        for (std::size_t i = 0; i < atoms.size(); ++i)
            for (std::size_t j = i + 1; j < atoms.size(); ++j) {
                const double a1 = atoms[i].ell * std::sqrt((double)atoms[i].b);
                const double a2 = atoms[j].ell * std::sqrt((double)atoms[j].b);
                if (std::abs(a1 - a2) > 1e-14) haveGoodPair = true;
            }
        if (!haveGoodPair)
            throw std::invalid_argument(
                "exceptional_set_discrete: adjacency regime needs a pair with "
                "p*sqrt(b) distinct");
        set.kind = ExceptionalKind::discreteCase2;
        set.energies = {0.0};
        // At E = 0 every one-step matrix is trace-free (M^2 = -I), which is
        // what breaks the Furstenberg certificate; det g stays nonzero.
        double worstTrace = 0.0;
        for (const auto& a : atoms)
            worstTrace =
                std::max(worstTrace, std::abs(map(0.0, a, a.ell).trace()));
        set.certificates.push_back(
            {0.0, CertificateKind::traceZeroPair, worstTrace});
        return set;
    }

    // Schroedinger regime: p == 1, per-pair case analysis, intersected.
    std::vector<std::vector<double>> perPair;
    ExceptionalKind lastKind = ExceptionalKind::discreteCase1a;
    CertificateKind certKind = CertificateKind::analyticFormula;
    for (std::size_t i = 0; i < atoms.size(); ++i)
        for (std::size_t j = i + 1; j < atoms.size(); ++j) {
            const auto& a1 = atoms[i];
            const auto& a2 = atoms[j];
            if (a1 == a2) continue;
            if (a1.ell != 1.0 || a2.ell != 1.0)
                throw std::invalid_argument(
                    "exceptional_set_discrete: schroedinger regime requires p=1");
            std::vector<double> s;
            if (a1.b == a2.b) {
                lastKind = ExceptionalKind::discreteCase1a;  // empty set
            } else if (std::abs((a1.b + 1) * a1.q - (a2.b + 1) * a2.q) < 1e-14) {
                lastKind = ExceptionalKind::discreteCase1bi;
                s.push_back((a1.b + 1) * a1.q);
            } else {
                // det g is affine in E with nonzero slope; one root.
                lastKind = ExceptionalKind::discreteCase1bii;
                certKind = CertificateKind::detGRoot;
                const double d0 = detg_at(0.0, a1, a2, map);
                const double d1 = detg_at(1.0, a1, a2, map);
                const double slope = d1 - d0;
                if (slope != 0.0) s.push_back(-d0 / slope);
            }
            perPair.push_back(std::move(s));
        }
    if (perPair.empty())
        throw std::invalid_argument("exceptional_set_discrete: needs >= 2 atoms");
    set.kind = lastKind;
    set.energies = intersect_sets(perPair);
    std::sort(set.energies.begin(), set.energies.end());
    for (double e : set.energies) {
        double worst = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i)
            for (std::size_t j = i + 1; j < atoms.size(); ++j)
                if (!(atoms[i] == atoms[j]))
                    worst = std::max(worst,
                                     std::abs(detg_at(e, atoms[i], atoms[j], map)));
        set.certificates.push_back({e, certKind, worst});
    }
    return set;
}

EllipticProbe elliptic_boundedness_probe(double E, const SiteParams& s1,
                                         const SiteParams& s2,
                                         const OneStepMap& map, int maxN,
                                         int trials, std::uint64_t seed) {
    if (maxN < 1)
        throw std::invalid_argument("elliptic_boundedness_probe: maxN >= 1");
    EllipticProbe p;
    const Mat2 m1 = map(E, s1, s1.ell);
    const Mat2 m2 = map(E, s2, s2.ell);
    p.commNorm = (m1 * m2 - m2 * m1).norm2();
    p.traces = {m1.trace(), m2.trace()};
    p.maxProductNorm = 0.0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(substream_seed(seed, t));
        ScaledMat2 acc;
        double prevP = (map.kind == StepKind::discreteJacobi)
                           ? (rng.next_double() < 0.5 ? s1.ell : s2.ell)
                           : 0.0;
        for (int j = 0; j < maxN; ++j) {
            const SiteParams& s = rng.next_double() < 0.5 ? s1 : s2;
            acc.premultiply(map(E, s, prevP));
            prevP = s.ell;
            p.maxProductNorm = std::max(p.maxProductNorm, std::exp(acc.logNorm2()));
        }
    }
    return p;
}

ZeroLeReport zero_le_block_identity(int b1, double q1, int b2, double q2,
                                    std::uint64_t seed) {
    if (b1 == b2)
        throw std::invalid_argument("zero_le_block_identity: need b1 != b2");
    if (std::abs((b1 + 1) * q1 - (b2 + 1) * q2) > 1e-12)
        throw std::invalid_argument(
            "zero_le_block_identity: need (b1+1)q1 == (b2+1)q2");
    ZeroLeReport rep;
    rep.e0 = (b1 + 1) * q1;
    const OneStepMap map = OneStepMap::discrete();
    const SiteParams s1{b1, 1.0, q1};
    const SiteParams s2{b2, 1.0, q2};
    const Mat2 m1 = map(rep.e0, s1, 1.0);
    const Mat2 m2 = map(rep.e0, s2, 1.0);
    const double r = -std::sqrt(static_cast<double>(b1) / b2);
    const Mat2 R = Mat2::diag(r, 1.0 / r);
    const Mat2 minusI = Mat2::diag(-1.0, -1.0);
    double worst = 0.0;
    worst = std::max(worst, (m1 * m1 - minusI).norm2());
    worst = std::max(worst, (m2 * m2 - minusI).norm2());
    worst = std::max(worst, (m1 * m2 - R.inverse()).norm2());
    worst = std::max(worst, (m2 * m1 - R).norm2());
    rep.maxIdentityResidual = worst;
    rep.identitiesHold = worst <= 1e-12;

    SingleGenDistribution dist({s1, s2}, {0.5, 0.5});
    rep.lyapunov = lyapunov_mc(rep.e0, dist, map, 10000, 50, seed);
    rep.lyapunovSmall = std::abs(rep.lyapunov.value) < 0.01;
    return rep;
}

std::string ExceptionalSet::to_json() const {
    nlohmann::json j;
    switch (kind) {
        case ExceptionalKind::continuumRBM: j["kind"] = "continuumRBM"; break;
        case ExceptionalKind::continuumRLM: j["kind"] = "continuumRLM"; break;
        case ExceptionalKind::continuumGeneric: j["kind"] = "continuumGeneric"; break;
        case ExceptionalKind::discreteCase1a: j["kind"] = "discreteCase1a"; break;
        case ExceptionalKind::discreteCase1bi: j["kind"] = "discreteCase1bi"; break;
        case ExceptionalKind::discreteCase1bii: j["kind"] = "discreteCase1bii"; break;
        case ExceptionalKind::discreteCase2: j["kind"] = "discreteCase2"; break;
    }
    j["energies"] = energies;
    for (const auto& c : certificates) {
        j["certificates"].push_back(
            {{"energy", c.energy},
             {"kind", c.kind == CertificateKind::detGRoot       ? "detG root"
                      : c.kind == CertificateKind::traceZeroPair ? "trace-zero pair"
                                                                 : "analytic formula"},
             {"residualDetG", c.residualDetG}});
    }
    return j.dump();
}

}  // namespace radloc
