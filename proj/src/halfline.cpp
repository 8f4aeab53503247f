#include "radloc/halfline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace radloc {

namespace {

constexpr double kAmpFloor = 1e-300;
constexpr double kTailFloor = 1e-250;  // vertices below this are off the fit

struct ShootState {
    double u = 0.0, du = 0.0, logScale = 0.0;

    void apply(const Mat2& m) {
        const double nu = m.a11 * u + m.a12 * du;
        const double ndu = m.a21 * u + m.a22 * du;
        u = nu;
        du = ndu;
        const double a = std::hypot(u, du);
        if (a > 1e280 || (a > 0.0 && a < 1e-280)) {
            u /= a;
            du /= a;
            logScale += std::log(a);
        }
    }
};

// Vertex map D(b) S(q).
Mat2 vertex_map(const SiteParams& s) {
    const double sb = std::sqrt(static_cast<double>(s.b));
    return {sb, 0.0, s.q / sb, 1.0 / sb};
}

// Dirichlet shot boundary data at t_j^+ for j = 0..n-1 plus the pre-vertex
// state at t_n^-.
void dirichlet_sweep(double E, const EnvironmentWord& word, std::size_t n,
                     std::vector<ShootState>& plus, ShootState& lastMinus) {
    plus.assign(1, {0.0, 1.0, 0.0});
    plus.reserve(n);
    ShootState st = plus[0];
    for (std::size_t j = 1; j <= n; ++j) {
        st.apply(rotation_block(E, word.params[j - 1].ell));
        if (j == n) {
            lastMinus = st;
            break;
        }
        st.apply(vertex_map(word.params[j - 1]));
        plus.push_back(st);
    }
}

// Neumann shot from the right: states at t_j^+ for j = 0..n-1, propagated
// backwards from (1, 0) at t_n^-.
std::vector<ShootState> neumann_backward_sweep(double E,
                                               const EnvironmentWord& word,
                                               std::size_t n) {
    std::vector<ShootState> plus(n);
    ShootState st{1.0, 0.0, 0.0};
    for (std::size_t j = n; j >= 1; --j) {
        st.apply(rotation_block(E, word.params[j - 1].ell).inverse());
        plus[j - 1] = st;
        if (j > 1) st.apply(vertex_map(word.params[j - 2]).inverse());
    }
    return plus;
}

double eval_from_state(const ShootState& st, double E, double s) {
    return std::exp(st.logScale) * (st.u * cE(E, s) + st.du * sE(E, s));
}

std::size_t locate_edge(const std::vector<double>& t, double x) {
    if (x < t.front() - 1e-12 || x > t.back() + 1e-12)
        throw std::invalid_argument("point outside the truncated interval");
    for (std::size_t j = 1; j < t.size(); ++j)
        if (x <= t[j] + 1e-12) return j;
    return t.size() - 1;
}

const double kGauss5X[5] = {-0.906179845938664, -0.538469310105683, 0.0,
                            0.538469310105683, 0.906179845938664};
const double kGauss5W[5] = {0.236926885056189, 0.478628670499366,
                            0.568888888888889, 0.478628670499366,
                            0.236926885056189};

}  // namespace

double ScaledReal::value() const { return mantissa * std::exp(logScale); }

double ScaledReal::logAbs() const {
    return std::log(std::max(std::abs(mantissa), kAmpFloor)) + logScale;
}

double HalfLineProfile::logAmp(std::size_t j) const {
    return logScale.at(j) + std::log(std::max(std::hypot(u[j], du[j]), kAmpFloor));
}

double HalfLineProfile::logAbsU(std::size_t j) const {
    return logScale.at(j) + std::log(std::max(std::abs(u[j]), kAmpFloor));
}

double HalfLineProfile::eval(std::size_t edge, double s) const {
    if (edge < 1 || edge > word.size())
        throw std::out_of_range("HalfLineProfile::eval: edge out of range");
    const ShootState st{u[edge - 1], du[edge - 1], logScale[edge - 1]};
    return eval_from_state(st, energy, s);
}

double HalfLineProfile::evalDeriv(std::size_t edge, double s) const {
    if (edge < 1 || edge > word.size())
        throw std::out_of_range("HalfLineProfile::evalDeriv: edge out of range");
    // d/ds of u c + du s is -E u s + du c.
    return std::exp(logScale[edge - 1]) *
           (-energy * u[edge - 1] * sE(energy, s) +
            du[edge - 1] * cE(energy, s));
}

HalfLineProfile shoot(double E, const EnvironmentWord& word,
                      std::pair<double, double> init) {
    if (init.first == 0.0 && init.second == 0.0)
        throw std::invalid_argument("shoot: init must be nonzero");
    if (word.size() == 0) throw std::invalid_argument("shoot: empty word");
    HalfLineProfile p;
    p.energy = E;
    p.word = word;
    const std::size_t n = word.size();
    p.u.reserve(n + 1);
    p.du.reserve(n + 1);
    p.logScale.reserve(n + 1);
    ShootState st{init.first, init.second, 0.0};
    p.u.push_back(st.u);
    p.du.push_back(st.du);
    p.logScale.push_back(st.logScale);
    for (std::size_t j = 0; j < n; ++j) {
        st.apply(continuum_step(E, word.params[j]));
        p.u.push_back(st.u);
        p.du.push_back(st.du);
        p.logScale.push_back(st.logScale);
    }
    return p;
}

ScaledReal neumann_shooting_function(double E, const EnvironmentWord& word,
                                     std::size_t n) {
    if (n < 1 || n > word.size())
        throw std::out_of_range("neumann_shooting_function: n out of range");
    std::vector<ShootState> plus;
    ShootState lastMinus;
    dirichlet_sweep(E, word, n, plus, lastMinus);
    return {lastMinus.du, lastMinus.logScale};
}

double default_grid_step(std::pair<double, double> window, std::size_t n) {
    return 0.005 * (window.second - window.first) / static_cast<double>(n);
}

TruncatedSpectrum truncated_eigenvalues(const EnvironmentWord& word,
                                        std::size_t n,
                                        std::pair<double, double> window,
                                        double gridStep) {
    if (!(gridStep > 0.0))
        throw std::invalid_argument("truncated_eigenvalues: gridStep must be > 0");
    if (!(window.first < window.second))
        throw std::invalid_argument("truncated_eigenvalues: empty window");
    TruncatedSpectrum spec;
    spec.word = word;
    spec.n = n;
    spec.window = window;

    auto f = [&](double E) { return neumann_shooting_function(E, word, n); };
    auto bisect = [&](double lo, double hi, int sLo) {
        for (int i = 0; i < 200 && hi - lo > 1e-11; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (f(mid).sign() == sLo)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };

    // Each scan cell is subsampled at quarter points so that root pairs
    // closer than gridStep are still separated.
    const int nCells = std::max(
        1, static_cast<int>(std::ceil((window.second - window.first) / gridStep)));
    const double h = (window.second - window.first) / nCells;
    const int sub = 4;
    double prevE = window.first;
    int prevS = f(prevE).sign();
    for (int i = 0; i < nCells; ++i)
        for (int k = 1; k <= sub; ++k) {
            const double e = window.first + (i + static_cast<double>(k) / sub) * h;
            const int s = f(e).sign();
            if (s != prevS && prevS != 0)
                spec.eigenvalues.push_back(bisect(prevE, e, prevS));
            prevE = e;
            prevS = s;
        }

    std::sort(spec.eigenvalues.begin(), spec.eigenvalues.end());
    spec.residuals.resize(spec.eigenvalues.size());
    spec.suspectedDouble.assign(spec.eigenvalues.size(), false);
    for (std::size_t i = 0; i < spec.eigenvalues.size(); ++i) {
        spec.residuals[i] = std::abs(f(spec.eigenvalues[i]).mantissa);
        if (i > 0 && spec.eigenvalues[i] - spec.eigenvalues[i - 1] < 1e-8) {
            spec.suspectedDouble[i] = true;
            spec.suspectedDouble[i - 1] = true;
        }
    }
    return spec;
}

double greens_function(const EnvironmentWord& word, std::size_t n, double E,
                       double x, double y) {
    if (n < 1 || n > word.size())
        throw std::out_of_range("greens_function: n out of range");
    if (x > y) std::swap(x, y);
    const std::vector<double> t = vertex_positions(word);
    if (x < t[0] || y > t[n])
        throw std::invalid_argument("greens_function: point outside [t_0, t_n]");

    std::vector<ShootState> minusPlus;  // Dirichlet shot states at t_j^+
    ShootState lastMinus;
    dirichlet_sweep(E, word, n, minusPlus, lastMinus);
    const std::vector<ShootState> plusPlus = neumann_backward_sweep(E, word, n);

    // W = u_-'(t_n^-) = u_+(t_0^+); reject near-eigenvalue energies.
    const ScaledReal W{lastMinus.du, lastMinus.logScale};
    const double refLog = std::log(std::hypot(lastMinus.u, lastMinus.du)) +
                          lastMinus.logScale;
    if (W.logAbs() < refLog + std::log(1e-10))
        throw std::domain_error("greens_function: E too close to an eigenvalue");

    const std::size_t ex = locate_edge(t, x);
    const std::size_t ey = locate_edge(t, y);
    const ShootState& sm = minusPlus[ex - 1];
    const ShootState& sp = plusPlus[ey - 1];
    const double um = sm.u * cE(E, x - t[ex - 1]) + sm.du * sE(E, x - t[ex - 1]);
    const double up = sp.u * cE(E, y - t[ey - 1]) + sp.du * sE(E, y - t[ey - 1]);
    return um * up / W.mantissa *
           std::exp(sm.logScale + sp.logScale - W.logScale);
}

HalfLineProfile eigenfunction_profile(const EnvironmentWord& word,
                                      std::size_t n, double Ek) {
    if (n < 1 || n > word.size())
        throw std::out_of_range("eigenfunction_profile: n out of range");
    EnvironmentWord trunc = word;
    trunc.params.resize(n);
    HalfLineProfile p = shoot(Ek, trunc, {0.0, 1.0});

    // The one-sided shot loses the decaying branch past the localization
    // center, so splice it with the right Neumann sweep: left data up to the
    // matching vertex, rescaled right data beyond it.
    std::vector<ShootState> right = neumann_backward_sweep(Ek, trunc, n);
    ShootState rn{1.0, 0.0, 0.0};
    rn.apply(vertex_map(trunc.params[n - 1]));
    right.push_back(rn);
    const auto rightLogAmp = [&](std::size_t j) {
        return right[j].logScale +
               std::log(std::max(std::hypot(right[j].u, right[j].du), kAmpFloor));
    };

    // Both sweeps track the eigenfunction where the sum of their amplitudes
    // peaks; match there.
    std::size_t js = 0;
    double bestScore = -1e308;
    for (std::size_t j = 0; j <= n; ++j) {
        const double score = p.logAmp(j) + rightLogAmp(j);
        if (score > bestScore) {
            bestScore = score;
            js = j;
        }
    }
    const double uL = p.u[js], dL = p.du[js];
    const double uR = right[js].u, dR = right[js].du;
    const double ampL = std::max(std::hypot(uL, dL), kAmpFloor);
    const double ampR = std::max(std::hypot(uR, dR), kAmpFloor);
    const double mismatch = std::abs(uL * dR - dL * uR) / (ampL * ampR);
    if (mismatch >= 1e-8)
        throw std::invalid_argument(
            "eigenfunction_profile: Neumann residual too large (stale eigenvalue?)");
    const bool useU = std::abs(uL) / ampL >= std::abs(dL) / ampL;
    const double num = useU ? uL : dL;
    const double den = useU ? uR : dR;
    const double logLam = std::log(std::abs(num)) + p.logScale[js] -
                          (std::log(std::max(std::abs(den), kAmpFloor)) +
                           right[js].logScale);
    const double sgn = (num < 0.0) == (den < 0.0) ? 1.0 : -1.0;
    for (std::size_t j = js + 1; j <= n; ++j) {
        p.u[j] = sgn * right[j].u;
        p.du[j] = sgn * right[j].du;
        p.logScale[j] = right[j].logScale + logLam;
    }
    double maxLog = -1e308;
    for (std::size_t j = 0; j < p.vertices(); ++j)
        maxLog = std::max(maxLog, p.logAmp(j));

    // Unit l2 of boundary data, computed in log space.
    double sum = 0.0;
    for (std::size_t j = 0; j < p.vertices(); ++j)
        sum += std::exp(2.0 * (p.logAmp(j) - maxLog));
    const double logNorm = maxLog + 0.5 * std::log(sum);
    for (double& ls : p.logScale) ls -= logNorm;
    p.normalization = ProfileNorm::l2;
    return p;
}

DecayFit decay_rate_fit(const HalfLineProfile& profile,
                        const TreeGeometry& geometry) {
    const std::vector<double>& t = geometry.positions;
    const std::size_t m = profile.vertices();
    if (t.size() < m)
        throw std::invalid_argument("decay_rate_fit: geometry/profile mismatch");

    std::size_t peak = 0;
    double peakLog = -1e308;
    for (std::size_t j = 0; j < m; ++j)
        if (profile.logAbsU(j) > peakLog) {
            peakLog = profile.logAbsU(j);
            peak = j;
        }
    if (m - peak - 1 < 50)
        throw std::invalid_argument(
            "decay_rate_fit: need >= 50 vertices beyond the peak");

    const double zeta = t[peak];
    double maxDist = 0.0;
    for (std::size_t j = 0; j < m; ++j)
        maxDist = std::max(maxDist, std::abs(t[j] - zeta));

    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < m; ++j) {
        const double d = std::abs(t[j] - zeta);
        if (d < 0.1 * maxDist) continue;  // exclude the 10% nearest the peak
        const double la = profile.logAbsU(j);
        if (la - peakLog <= std::log(kTailFloor)) continue;
        xs.push_back(d);
        ys.push_back(la);
    }
    if (xs.size() < 2)
        throw std::invalid_argument("decay_rate_fit: tail is numerically zero");

    const LineFit fit = fit_line(xs, ys);
    DecayFit out;
    out.zeta = zeta;
    out.lambdaHat = -fit.slope;
    out.rSquared = fit.rSquared;
    out.localized = out.lambdaHat > 1e-3;
    return out;
}

double edge_quadrature(double ell, double E,
                       const std::function<double(double)>& f) {
    // Composite 5-point Gauss; panel width small against the oscillation
    // scale 1/sqrt(|E|).
    const int panels =
        std::max(4, static_cast<int>(std::ceil(std::sqrt(std::abs(E)) * ell / 0.5)));
    const double h = ell / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h;
        double acc = 0.0;
        for (int g = 0; g < 5; ++g) acc += kGauss5W[g] * f(mid + 0.5 * h * kGauss5X[g]);
        total += 0.5 * h * acc;
    }
    return total;
}

double profile_l2_norm(const HalfLineProfile& profile, std::size_t n) {
    double sum = 0.0;
    const double E = profile.energy;
    for (std::size_t e = 1; e <= n; ++e) {
        const double ell = profile.word.params[e - 1].ell;
        sum += edge_quadrature(ell, E, [&](double s) {
            const double v = profile.eval(e, s);
            return v * v;
        });
    }
    return std::sqrt(sum);
}

namespace {

// Shared eigenexpansion driver: innerFn(phi) -> <phi, psi>,
// weightFn(t) -> |X|^{2p} factor at global coordinate t.
double moment_sum(const EnvironmentWord& word, std::size_t n,
                  std::pair<double, double> window, double p,
                  const std::function<double(const HalfLineProfile&)>& innerFn,
                  double radialOffset) {
    if (!(p > 0.0)) throw std::invalid_argument("dynamical_moment: p must be > 0");
    const TruncatedSpectrum spec = truncated_eigenvalues(
        word, n, window, default_grid_step(window, n));
    const std::vector<double> t = vertex_positions(word);
    double total = 0.0;
    for (double Ek : spec.eigenvalues) {
        HalfLineProfile phi = eigenfunction_profile(word, n, Ek);
        const double norm = profile_l2_norm(phi, n);
        if (norm <= 0.0) continue;
        const double logNorm = std::log(norm);
        for (double& ls : phi.logScale) ls -= logNorm;  // unit interval L2

        const double inner = innerFn(phi);
        double xsum = 0.0;
        for (std::size_t e = 1; e <= n; ++e) {
            const double ell = word.params[e - 1].ell;
            xsum += edge_quadrature(ell, Ek, [&](double s) {
                const double v = phi.eval(e, s);
                const double x = radialOffset + t[e - 1] + s;
                return std::pow(std::abs(x), 2.0 * p) * v * v;
            });
        }
        total += std::abs(inner) * std::sqrt(xsum);
    }
    return total;
}

}  // namespace

double dynamical_moment(const EnvironmentWord& word, std::size_t n,
                        std::pair<double, double> window, double p,
                        const PiecewisePoly& psi) {
    if (psi.edges() < n)
        throw std::invalid_argument("dynamical_moment: psi does not cover [t_0, t_n]");
    return moment_sum(
        word, n, window, p,
        [&](const HalfLineProfile& phi) {
            double acc = 0.0;
            for (std::size_t e = 1; e <= n; ++e)
                acc += edge_quadrature(word.params[e - 1].ell, phi.energy,
                                       [&](double s) {
                                           return phi.eval(e, s) * psi.eval(e, s);
                                       });
            return acc;
        },
        0.0);
}

double dynamical_moment(const EnvironmentWord& word, std::size_t n,
                        std::pair<double, double> window, double p,
                        const HalfLineProfile& psi) {
    return moment_sum(
        word, n, window, p,
        [&](const HalfLineProfile& phi) {
            double acc = 0.0;
            for (std::size_t e = 1; e <= n; ++e)
                acc += edge_quadrature(word.params[e - 1].ell,
                                       std::max(std::abs(phi.energy),
                                                std::abs(psi.energy)),
                                       [&](double s) {
                                           return phi.eval(e, s) * psi.eval(e, s);
                                       });
            return acc;
        },
        0.0);
}

double dynamical_moment_bound(const EnvironmentWord& word, std::size_t n,
                              std::pair<double, double> window, double p,
                              double supportRadius, double radialOffset) {
    if (!(supportRadius > 0.0))
        throw std::invalid_argument("dynamical_moment_bound: supportRadius must be > 0");
    const std::vector<double> t = vertex_positions(word);
    return moment_sum(
        word, n, window, p,
        [&, t](const HalfLineProfile& phi) {
            // ||phi||_{L2[0, supportRadius]} bounds |<phi, psi>| over unit psi.
            double acc = 0.0;
            for (std::size_t e = 1; e <= n && t[e - 1] < supportRadius; ++e) {
                const double len =
                    std::min(word.params[e - 1].ell, supportRadius - t[e - 1]);
                acc += edge_quadrature(len, phi.energy, [&](double s) {
                    const double v = phi.eval(e, s);
                    return v * v;
                });
            }
            return std::sqrt(acc);
        },
        radialOffset);
}

std::string spectrum_csv(const TruncatedSpectrum& spectrum) {
    std::ostringstream os;
    os.precision(17);
    os << "index,eigenvalue,residual,suspectedDouble\n";
    for (std::size_t i = 0; i < spectrum.eigenvalues.size(); ++i)
        os << i << ',' << spectrum.eigenvalues[i] << ',' << spectrum.residuals[i]
           << ',' << (spectrum.suspectedDouble[i] ? 1 : 0) << '\n';
    return os.str();
}

std::string profile_csv(const HalfLineProfile& profile) {
    std::ostringstream os;
    os.precision(17);
    os << "index,t,u,du\n";
    const std::vector<double> t = vertex_positions(profile.word);
    for (std::size_t j = 0; j < profile.vertices(); ++j) {
        const double s = std::exp(profile.logScale[j]);
        os << j << ',' << t[j] << ',' << profile.u[j] * s << ','
           << profile.du[j] * s << '\n';
    }
    return os.str();
}

}  // namespace radloc
