#ifndef RADLOC_HALFLINE_HPP
#define RADLOC_HALFLINE_HPP

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "radloc/cocycle.hpp"
#include "radloc/model.hpp"

namespace radloc {

// Signed scalar with a factored-out exponent: value = mantissa * exp(logScale).
struct ScaledReal {
    double mantissa = 0.0;
    double logScale = 0.0;

    double value() const;
    double logAbs() const;
    int sign() const { return mantissa > 0.0 ? 1 : mantissa < 0.0 ? -1 : 0; }
};

enum class ProfileNorm { sup, l2, none };

// Boundary data (u, du) at each vertex t_j^+, log-scaled per vertex so that
// deeply localized solutions never overflow. Entry j is at t_j^+, j = 0..n.
struct HalfLineProfile {
    double energy = 0.0;
    EnvironmentWord word;
    std::vector<double> u, du;
    std::vector<double> logScale;
    ProfileNorm normalization = ProfileNorm::none;

    std::size_t vertices() const { return u.size(); }
    // log |(u, du)| at vertex j including the scale factor.
    double logAmp(std::size_t j) const;
    // log(|u(t_j)| + floor) including the scale factor.
    double logAbsU(std::size_t j) const;

    // Function value / derivative at t_{edge-1} + s, 0 <= s <= ell_edge,
    // edge in 1..word.size(). Interpolation by the energy-E fundamental
    // solutions from the left endpoint's boundary data.
    double eval(std::size_t edge, double s) const;
    double evalDeriv(std::size_t edge, double s) const;
};

// Propagate (u0, du0) from t_0^+ through every edge+vertex of the word.
HalfLineProfile shoot(double E, const EnvironmentWord& word,
                      std::pair<double, double> init);

// f'(t_n^-) for the Dirichlet shot f(t_0^+)=0, f'(t_0^+)=1; the n-th edge is
// propagated but vertex n's S and D maps are not applied.
ScaledReal neumann_shooting_function(double E, const EnvironmentWord& word,
                                     std::size_t n);

struct TruncatedSpectrum {
    EnvironmentWord word;
    std::size_t n = 0;
    std::pair<double, double> window;
    std::vector<double> eigenvalues;  // ascending
    std::vector<double> residuals;    // |shooting mantissa| at each root
    std::vector<bool> suspectedDouble;
};

// Sign-change scan of the shooting function at gridStep (each cell is
// subsampled once to catch root pairs) followed by bisection to 1e-11.
TruncatedSpectrum truncated_eigenvalues(const EnvironmentWord& word,
                                        std::size_t n,
                                        std::pair<double, double> window,
                                        double gridStep);

double default_grid_step(std::pair<double, double> window, std::size_t n);

// G(x, y) = u_-(x) u_+(y) / W for x <= y, symmetric otherwise; u_- is the
// Dirichlet shot from the left, u_+ the Neumann shot from the right, and
// W = u_-'(t_n^-) = u_+(t_0^+).
double greens_function(const EnvironmentWord& word, std::size_t n, double E,
                       double x, double y);

// Dirichlet shot at a truncated eigenvalue, unit-l2 boundary data. Throws if
// the Neumann residual at t_n^- exceeds 1e-8 relative to the profile scale.
HalfLineProfile eigenfunction_profile(const EnvironmentWord& word,
                                      std::size_t n, double Ek);

struct DecayFit {
    double zeta = 0.0;       // position of max |u|
    double lambdaHat = 0.0;  // fitted decay rate (positive when decaying)
    double rSquared = 0.0;
    bool localized = false;  // lambdaHat clearly positive
};

DecayFit decay_rate_fit(const HalfLineProfile& profile,
                        const TreeGeometry& geometry);

// psi as per-edge quadratic coefficients: on edge j (1-based),
// psi(t_{j-1} + s) = c0 + c1 s + c2 s^2.
struct PiecewisePoly {
    std::vector<std::array<double, 3>> coeffs;

    double eval(std::size_t edge, double s) const {
        const auto& c = coeffs.at(edge - 1);
        return c[0] + s * (c[1] + s * c[2]);
    }
    std::size_t edges() const { return coeffs.size(); }
};

// Time-uniform eigenexpansion bound sum_k |<phi_k, psi>| * |||X|^p phi_k||
// over truncated eigenpairs with E_k in the window.
double dynamical_moment(const EnvironmentWord& word, std::size_t n,
                        std::pair<double, double> window, double p,
                        const PiecewisePoly& psi);

// Same bound with psi given as a half-line profile (e.g. an eigenfunction).
double dynamical_moment(const EnvironmentWord& word, std::size_t n,
                        std::pair<double, double> window, double p,
                        const HalfLineProfile& psi);

// Worst-case bound over unit psi supported in [0, supportRadius]:
// sum_k ||phi_k||_{L2[0,supportRadius]} * (int (radialOffset+t)^{2p} phi_k^2)^{1/2}.
double dynamical_moment_bound(const EnvironmentWord& word, std::size_t n,
                              std::pair<double, double> window, double p,
                              double supportRadius, double radialOffset = 0.0);

// Edgewise composite Gauss quadrature of f(edge, s) over [0, ell_edge].
double edge_quadrature(double ell, double E,
                       const std::function<double(double)>& f);

// L2 norm of the profile over [t_0, t_n] by edgewise quadrature.
double profile_l2_norm(const HalfLineProfile& profile, std::size_t n);

std::string spectrum_csv(const TruncatedSpectrum& spectrum);
std::string profile_csv(const HalfLineProfile& profile);

}  // namespace radloc

#endif
