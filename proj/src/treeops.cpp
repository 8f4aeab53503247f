#include "radloc/treeops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace radloc {

namespace {

// Branching (number of children) of a generation-g vertex.
int branching_at(const TreeGeometry& geometry, std::size_t g) {
    if (g == 0) return static_cast<int>(geometry.genWeights.at(1));
    return geometry.word.params.at(g - 1).b;
}

// Number of generation-g descendants of one generation-a vertex.
double descendant_count(const TreeGeometry& geometry, std::size_t a,
                        std::size_t g) {
    double c = 1.0;
    for (std::size_t h = a; h < g; ++h) c *= branching_at(geometry, h);
    return c;
}

// 1/sqrt(w_v) dilution factor for a lift based at generation n0, evaluated
// in the generation band g (edges between generations g-1 and g).
double band_dilution(const TreeGeometry& geometry, std::size_t n0,
                     std::size_t g) {
    return std::sqrt(static_cast<double>(geometry.genWeights.at(g)) /
                     static_cast<double>(geometry.genWeights.at(n0)));
}

}  // namespace

bool VertexAddress::is_prefix_of(const VertexAddress& o) const {
    if (path.size() > o.path.size()) return false;
    return std::equal(path.begin(), path.end(), o.path.begin());
}

std::string VertexAddress::to_string() const {
    std::string s = "o";
    for (int p : path) {
        s += '.';
        s += std::to_string(p);
    }
    return s;
}

std::complex<double> LiftedFunction::branch_amplitude(int branch) const {
    if (fourierIndex == 0) return 1.0;
    const double a = 2.0 * M_PI * branch * fourierIndex / baseBranching;
    return {std::cos(a), std::sin(a)};
}

LiftedFunction lift(const HalfLineProfile& profile, const VertexAddress& v,
                    int k, const TreeGeometry& geometry) {
    const std::size_t n0 = v.generation();
    if (n0 + profile.word.size() > geometry.word.size())
        throw std::invalid_argument("lift: profile extends past the geometry");
    for (std::size_t i = 0; i < profile.word.size(); ++i)
        if (profile.word.params[i] != geometry.word.params[n0 + i])
            throw std::invalid_argument("lift: profile word is not the shifted word");
    for (std::size_t g = 0; g < n0; ++g)
        if (v.path[g] < 1 || v.path[g] > branching_at(geometry, g))
            throw std::invalid_argument("lift: invalid vertex address");
    const double amp0 = std::hypot(profile.u[0], profile.du[0]);
    if (!(std::abs(profile.u[0]) <= 1e-9 * amp0))
        throw std::invalid_argument("lift: profile must start with Dirichlet data");
    const int b = branching_at(geometry, n0);
    if (k == 0) {
        if (n0 != 0)
            throw std::invalid_argument("lift: k = 0 is reserved for the root");
    } else if (k < 1 || k > b - 1) {
        throw std::invalid_argument("lift: fourier index out of [1, b-1]");
    }
    LiftedFunction fn;
    fn.base = v;
    fn.fourierIndex = k;
    fn.baseBranching = b;
    fn.profile = profile;
    return fn;
}

std::complex<double> lift_vertex_value(const LiftedFunction& fn,
                                       const VertexAddress& v,
                                       const TreeGeometry& geometry) {
    const std::size_t n0 = fn.base.generation();
    const std::size_t g = v.generation();
    if (g <= n0 || !fn.base.is_prefix_of(v)) return 0.0;
    const std::size_t i = g - n0;
    if (i > fn.profile.word.size()) return 0.0;
    const std::complex<double> amp =
        (n0 < g && fn.fourierIndex != 0) ? fn.branch_amplitude(v.path[n0])
                                         : fn.branch_amplitude(1);
    const double ell = fn.profile.word.params[i - 1].ell;
    return amp * fn.profile.eval(i, ell) / band_dilution(geometry, n0, g);
}

KirchhoffResidual kirchhoff_residual(const LiftedFunction& fn,
                                     const VertexAddress& v,
                                     const TreeGeometry& geometry) {
    KirchhoffResidual r;
    const std::size_t n0 = fn.base.generation();
    const std::size_t g = v.generation();
    if (!fn.base.is_prefix_of(v) && !(v.is_prefix_of(fn.base))) return r;
    if (g < n0) return r;  // function vanishes identically near v

    const std::size_t profLen = fn.profile.word.size();
    std::vector<std::complex<double>> values;       // one-sided limits
    std::complex<double> fluxSum = 0.0;             // sum of inward derivatives
    double qv = (g >= 1) ? geometry.word.params[g - 1].q : 0.0;

    if (g == n0) {
        // Base vertex: Dirichlet start, children carry the Fourier weights.
        const int b = branching_at(geometry, g);
        const double dil = band_dilution(geometry, n0, g + 1);
        const double f0 = fn.profile.eval(1, 0.0);
        const double df0 = fn.profile.evalDeriv(1, 0.0);
        for (int j = 1; j <= b; ++j) {
            const std::complex<double> a = fn.branch_amplitude(j);
            values.push_back(a * f0 / dil);
            fluxSum += a * df0 / dil;
        }
        if (g > 0) values.push_back(0.0);  // parent side: outside the support
        r.scale = std::max(std::abs(f0), std::abs(df0)) / dil;
    } else {
        const std::size_t i = g - n0;
        if (i >= profLen)
            throw std::invalid_argument(
                "kirchhoff_residual: vertex outside the truncated support");
        const std::complex<double> amp = fn.branch_amplitude(v.path[n0]);
        const int bg = geometry.word.params[g - 1].b;
        const double ell = fn.profile.word.params[i - 1].ell;
        const double dilP = band_dilution(geometry, n0, g);
        const double dilC = band_dilution(geometry, n0, g + 1);
        const double fMinus = fn.profile.eval(i, ell);
        const double dfMinus = fn.profile.evalDeriv(i, ell);
        const double fPlus = std::exp(fn.profile.logScale[i]) * fn.profile.u[i];
        const double dfPlus = std::exp(fn.profile.logScale[i]) * fn.profile.du[i];
        const std::complex<double> parentVal = amp * fMinus / dilP;
        const std::complex<double> childVal = amp * fPlus / dilC;
        values.push_back(parentVal);
        for (int j = 0; j < bg; ++j) values.push_back(childVal);
        fluxSum = amp * (-dfMinus / dilP +
                         static_cast<double>(bg) * dfPlus / dilC);
        r.scale = std::max({std::abs(fMinus) / dilP, std::abs(dfMinus) / dilP,
                            std::abs(fPlus) / dilC, std::abs(dfPlus) / dilC});
    }

    for (std::size_t a = 0; a < values.size(); ++a)
        for (std::size_t b = a + 1; b < values.size(); ++b)
            r.continuityResidual =
                std::max(r.continuityResidual, std::abs(values[a] - values[b]));
    std::complex<double> fv = 0.0;
    for (const auto& val : values) fv += val;
    fv /= static_cast<double>(values.size());
    r.fluxResidual = std::abs(fluxSum - qv * fv);
    return r;
}

TreeDecayReport tree_decay_check(const LiftedFunction& fn,
                                 const TreeGeometry& geometry) {
    const std::size_t n0 = fn.base.generation();
    const std::size_t profLen = fn.profile.word.size();
    // y_g = |f at a generation-g vertex| * sqrt(w_o(g)); by radiality all
    // generation-g vertices in the support give the same magnitude.
    std::vector<double> tAll, yAll;
    for (std::size_t i = 1; i <= profLen; ++i) {
        const std::size_t g = n0 + i;
        const double ell = fn.profile.word.params[i - 1].ell;
        const double mag =
            std::abs(fn.profile.eval(i, ell)) / band_dilution(geometry, n0, g);
        const double y = mag * std::sqrt(static_cast<double>(geometry.genWeights[g]));
        tAll.push_back(geometry.positions[g]);
        yAll.push_back(std::log(std::max(y, 1e-300)));
    }
    if (tAll.size() < 3)
        throw std::invalid_argument("tree_decay_check: too few generations");

    std::size_t peak = 0;
    for (std::size_t i = 1; i < tAll.size(); ++i)
        if (yAll[i] > yAll[peak]) peak = i;

    // Fit on the tail beyond the peak, excluding the 10% nearest it.
    const double tPeak = tAll[peak];
    const double span = tAll.back() - tPeak;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < tAll.size(); ++i) {
        if (tAll[i] - tPeak < 0.1 * span) continue;
        if (yAll[i] - yAll[peak] <= std::log(1e-250)) continue;
        xs.push_back(tAll[i]);
        ys.push_back(yAll[i]);
    }
    TreeDecayReport rep;
    if (xs.size() < 2) return rep;
    const LineFit fit = fit_line(xs, ys);
    rep.lambda = -fit.slope;
    rep.C = std::exp(fit.intercept);
    bool comply = rep.lambda > 1e-3;
    // 5% slack measured against the total fitted decay range.
    const double slack = 0.05 * std::max(rep.lambda * (tAll.back() - tAll.front()), 1e-9);
    for (std::size_t i = 0; i < tAll.size() && comply; ++i)
        if (yAll[i] > fit.intercept - rep.lambda * tAll[i] + slack) comply = false;
    rep.holds = comply;
    return rep;
}

double tree_dynamical_moment(const EnvironmentWord& word, std::size_t depth,
                             std::pair<double, double> window, double p,
                             double compactSupportRadius) {
    if (depth < 1 || depth > word.size())
        throw std::out_of_range("tree_dynamical_moment: depth out of range");
    const std::vector<double> t = vertex_positions(word);
    if (!(compactSupportRadius <= t[depth] / 2.0))
        throw std::invalid_argument(
            "tree_dynamical_moment: support radius exceeds half the truncation");
    double total = 0.0;
    for (std::size_t n = 0; n < depth && t[n] < compactSupportRadius; ++n) {
        const double mult = multiplicity(word, n);
        if (mult == 0.0) continue;
        EnvironmentWord shifted;
        shifted.origin = WordOrigin::explicit_;
        shifted.params.assign(word.params.begin() + n,
                              word.params.begin() + depth);
        total += static_cast<double>(mult) *
                 dynamical_moment_bound(shifted, depth - n, window, p,
                                        compactSupportRadius - t[n], t[n]);
    }
    return total;
}

std::complex<double> tree_inner_product(const LiftedFunction& f1,
                                        const LiftedFunction& f2,
                                        const TreeGeometry& geometry,
                                        std::size_t depth) {
    const std::size_t n1 = f1.base.generation();
    const std::size_t n2 = f2.base.generation();
    const bool nested12 = f1.base.is_prefix_of(f2.base);
    const bool nested21 = f2.base.is_prefix_of(f1.base);
    if (!nested12 && !nested21) return 0.0;  // disjoint supports

    const LiftedFunction& deep = (n2 >= n1) ? f2 : f1;
    const std::size_t nD = deep.base.generation();
    const std::size_t nS = std::min(n1, n2);
    const std::size_t gMax =
        std::min({depth, n1 + f1.profile.word.size(), n2 + f2.profile.word.size()});

    std::complex<double> total = 0.0;
    for (std::size_t g = nD + 1; g <= gMax; ++g) {
        const double ell = geometry.word.params[g - 1].ell;
        const double Eref = std::max(std::abs(f1.profile.energy),
                                     std::abs(f2.profile.energy));
        const std::size_t e1 = g - n1, e2 = g - n2;
        const double Ig = edge_quadrature(ell, Eref, [&](double s) {
            return f1.profile.eval(e1, s) * f2.profile.eval(e2, s);
        });
        // Amplitude sum over band-g edges lying in both supports: the deeper
        // base's child index runs free, the shallower base's is pinned.
        const int bD = deep.baseBranching;
        const double perChild = descendant_count(geometry, nD + 1, g);
        std::complex<double> A = 0.0;
        for (int j = 1; j <= bD; ++j) {
            std::complex<double> a1, a2;
            if (n1 == n2) {
                a1 = f1.branch_amplitude(j);
                a2 = f2.branch_amplitude(j);
            } else if (n1 == nD) {
                a1 = f1.branch_amplitude(j);
                a2 = f2.branch_amplitude(f1.base.path[n2]);
            } else {
                a1 = f1.branch_amplitude(f2.base.path[n1]);
                a2 = f2.branch_amplitude(j);
            }
            A += std::conj(a1) * a2 * perChild;
        }
        const double wFac =
            std::sqrt(static_cast<double>(geometry.genWeights[n1]) *
                      static_cast<double>(geometry.genWeights[n2])) /
            static_cast<double>(geometry.genWeights[g]);
        total += Ig * wFac * A;
    }
    return total;
}

std::string tree_csv(const LiftedFunction& fn, const TreeGeometry& geometry,
                     std::size_t depth) {
    std::ostringstream os;
    os.precision(17);
    os << "generation,vertexPath,branchIndex,re,im\n";
    std::function<void(VertexAddress&)> walk = [&](VertexAddress& v) {
        const std::size_t g = v.generation();
        if (g > 0) {
            const std::complex<double> val = lift_vertex_value(fn, v, geometry);
            os << g << ',' << v.to_string() << ',' << v.path.back() << ','
               << val.real() << ',' << val.imag() << '\n';
        }
        if (g == depth) return;
        const int b = branching_at(geometry, g);
        for (int j = 1; j <= b; ++j) {
            v.path.push_back(j);
            walk(v);
            v.path.pop_back();
        }
    };
    VertexAddress root;
    walk(root);
    return os.str();
}

}  // namespace radloc
