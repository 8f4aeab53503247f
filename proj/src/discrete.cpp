#include "radloc/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace radloc {

namespace {

constexpr long long kVertexGuard = 10'000'000;

// Children count of a generation-g vertex: c_0 is the root branching, then
// the word's entry for generation g.
int child_count(const EnvironmentWord& word, std::size_t g, int rootBranching) {
    if (g == 0) return rootBranching;
    return word.params.at(g).b;
}

std::vector<double> sorted_eigs(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    std::vector<double> v(es.eigenvalues().data(),
                          es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(v.begin(), v.end());
    return v;
}

std::vector<std::pair<double, double>> merge_bands(
    std::vector<std::pair<double, double>> bands) {
    std::sort(bands.begin(), bands.end());
    std::vector<std::pair<double, double>> out;
    for (const auto& b : bands) {
        if (!out.empty() && b.first <= out.back().second + 1e-9)
            out.back().second = std::max(out.back().second, b.second);
        else
            out.push_back(b);
    }
    return out;
}

// Band set {E in window : |trace(E)| <= 2} for one trace function, edges
// refined by bisection to 1e-9.
std::vector<std::pair<double, double>> trace_bands(
    const std::function<double(double)>& trace,
    std::pair<double, double> window) {
    const int nGrid = 4000;
    const double h = (window.second - window.first) / nGrid;
    auto inBand = [&](double E) { return std::abs(trace(E)) <= 2.0; };
    auto refine = [&](double lo, double hi) {
        // lo and hi have different inBand status.
        const bool inLo = inBand(lo);
        for (int i = 0; i < 100 && hi - lo > 1e-9; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (inBand(mid) == inLo)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };
    std::vector<std::pair<double, double>> bands;
    double bandStart = 0.0;
    bool open = false;
    double prevE = window.first;
    bool prevIn = inBand(prevE);
    if (prevIn) {
        open = true;
        bandStart = prevE;
    }
    for (int i = 1; i <= nGrid; ++i) {
        const double e = window.first + i * h;
        const bool in = inBand(e);
        if (in != prevIn) {
            const double edge = refine(prevE, e);
            if (in) {
                open = true;
                bandStart = edge;
            } else if (open) {
                bands.emplace_back(bandStart, edge);
                open = false;
            }
        }
        prevE = e;
        prevIn = in;
    }
    if (open) bands.emplace_back(bandStart, window.second);
    return bands;
}

}  // namespace

Eigen::MatrixXd JacobiMatrix::dense() const {
    const std::size_t n = size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        m(j, j) = diag[j];
        if (j + 1 < n) m(j, j + 1) = m(j + 1, j) = offdiag[j];
    }
    return m;
}

std::vector<double> JacobiMatrix::eigenvalues() const { return sorted_eigs(dense()); }

FiniteTree build_finite_tree(const EnvironmentWord& word, std::size_t depth,
                             int rootBranching) {
    if (depth < 1) throw std::invalid_argument("build_finite_tree: depth >= 1");
    if (word.size() < depth)
        throw std::invalid_argument("build_finite_tree: word does not cover depth");
    if (rootBranching == 0) rootBranching = word.params[0].b;
    if (rootBranching < 1)
        throw std::invalid_argument("build_finite_tree: invalid root branching");

    FiniteTree t;
    t.depth = depth;
    t.genCounts.assign(depth + 1, 1);
    long long total = 1;
    for (std::size_t g = 0; g < depth; ++g) {
        const int c = child_count(word, g, rootBranching);
        if (c < 1) throw std::invalid_argument("build_finite_tree: branching < 1");
        t.childCounts.push_back(c);
        t.genCounts[g + 1] = t.genCounts[g] * c;
        total += t.genCounts[g + 1];
        if (total > kVertexGuard)
            throw std::invalid_argument("build_finite_tree: vertex count > 1e7");
    }

    t.parent.assign(total, -1);
    t.children.assign(total, {});
    t.generation.assign(total, 0);
    int next = 1;
    std::vector<int> frontier{0};
    for (std::size_t g = 0; g < depth; ++g) {
        std::vector<int> nextFrontier;
        for (int u : frontier)
            for (int c = 0; c < t.childCounts[g]; ++c) {
                const int v = next++;
                t.parent[v] = u;
                t.children[u].push_back(v);
                t.generation[v] = static_cast<int>(g) + 1;
                nextFrontier.push_back(v);
            }
        frontier = std::move(nextFrontier);
    }
    return t;
}

Eigen::MatrixXd dense_operator(const FiniteTree& tree,
                               const EnvironmentWord& word, TreeRegime regime) {
    const std::size_t need =
        regime == TreeRegime::schroedinger ? tree.depth + 1 : tree.depth;
    if (word.size() < need)
        throw std::invalid_argument("dense_operator: word does not cover the tree");
    const Eigen::Index n = static_cast<Eigen::Index>(tree.vertexCount());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index u = 0; u < n; ++u) {
        const int g = tree.generation[u];
        if (regime == TreeRegime::schroedinger) {
            const int deg =
                static_cast<int>(tree.children[u].size()) + (u == 0 ? 0 : 1);
            m(u, u) = deg * word.params[g].q;
        }
        for (int v : tree.children[u]) {
            const double coupling =
                regime == TreeRegime::adjacency ? -word.params[g].ell : -1.0;
            m(u, v) = m(v, u) = coupling;
        }
    }
    return m;
}

std::size_t BreuerBasis::totalVectors() const {
    std::size_t n = 0;
    for (const auto& c : chains) n += c.vectors.size();
    return n;
}

Eigen::MatrixXd BreuerBasis::as_matrix(std::size_t dim) const {
    Eigen::MatrixXd m(dim, totalVectors());
    Eigen::Index col = 0;
    for (const auto& c : chains)
        for (const auto& v : c.vectors) m.col(col++) = v;
    return m;
}

BreuerBasis breuer_basis(const FiniteTree& tree, const EnvironmentWord& word) {
    const std::size_t dim = tree.vertexCount();
    BreuerBasis basis;

    // Extend a seed forward: each vertex spreads its value over its children,
    // divided by sqrt(children count of its generation).
    auto extend = [&](BreuerBasis::Chain& chain) {
        while (true) {
            const Eigen::VectorXd& prev = chain.vectors.back();
            const std::size_t g = chain.startGen + chain.vectors.size() - 1;
            if (g >= tree.depth) break;
            Eigen::VectorXd next = Eigen::VectorXd::Zero(dim);
            const double inv = 1.0 / std::sqrt(static_cast<double>(tree.childCounts[g]));
            for (std::size_t u = 0; u < dim; ++u) {
                if (prev[u] == 0.0) continue;
                for (int v : tree.children[u]) next[v] = prev[u] * inv;
            }
            chain.vectors.push_back(std::move(next));
        }
    };

    BreuerBasis::Chain root;
    root.startGen = 0;
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(dim);
    e0[0] = 1.0;
    root.vectors.push_back(std::move(e0));
    extend(root);
    basis.chains.push_back(std::move(root));

    // Generation-n seeds, n >= 1: per generation-(n-1) vertex, the orthogonal
    // complement of the constant vector on its children (Helmert family).
    for (std::size_t u = 0; u < dim; ++u) {
        const auto& kids = tree.children[u];
        const int m = static_cast<int>(kids.size());
        for (int k = 1; k < m; ++k) {
            BreuerBasis::Chain chain;
            chain.startGen = tree.generation[u] + 1;
            Eigen::VectorXd seed = Eigen::VectorXd::Zero(dim);
            const double norm = std::sqrt(static_cast<double>(k) * (k + 1));
            for (int j = 0; j < k; ++j) seed[kids[j]] = 1.0 / norm;
            seed[kids[k]] = -static_cast<double>(k) / norm;
            chain.vectors.push_back(std::move(seed));
            extend(chain);
            basis.chains.push_back(std::move(chain));
        }
    }

    if (basis.totalVectors() != dim)
        throw std::logic_error("breuer_basis: rank deficiency (convention mismatch)");
    const Eigen::MatrixXd phi = basis.as_matrix(dim);
    const double gramErr =
        (phi.transpose() * phi - Eigen::MatrixXd::Identity(dim, dim))
            .cwiseAbs()
            .maxCoeff();
    if (gramErr > 1e-10)
        throw std::logic_error("breuer_basis: family is not orthonormal");
    (void)word;
    return basis;
}

JacobiMatrix jacobi_from_word(const EnvironmentWord& word, std::size_t startGen,
                              std::size_t size) {
    if (startGen + size > word.size())
        throw std::out_of_range("jacobi_from_word: word does not cover the block");
    JacobiMatrix j;
    for (std::size_t i = 0; i < size; ++i) {
        const std::size_t g = startGen + i;
        const SiteParams& s = word.params[g];
        const double prevP = g == 0 ? 0.0 : word.params[g - 1].ell;
        j.diag.push_back((s.b * s.ell + prevP) * s.q);
        if (i + 1 < size) j.offdiag.push_back(std::sqrt(static_cast<double>(s.b)) * s.ell);
    }
    return j;
}

JacobiMatrix truncated_jacobi_block(const EnvironmentWord& word,
                                    std::size_t startGen, std::size_t size,
                                    TreeRegime regime) {
    if (regime == TreeRegime::adjacency) {
        JacobiMatrix j = jacobi_from_word(word, startGen, size);
        std::fill(j.diag.begin(), j.diag.end(), 0.0);
        return j;
    }
    // The vertex-potential operator has unit hopping, so its Jacobi blocks
    // use p == 1 regardless of the word's edge weights.
    EnvironmentWord unit = word;
    for (auto& s : unit.params) s.ell = 1.0;
    JacobiMatrix j = jacobi_from_word(unit, startGen, size);
    // The last row sits at the truncation boundary: no children term.
    const std::size_t g = startGen + size - 1;
    j.diag.back() = (g == 0 ? 0.0 : 1.0) * word.params[g].q;
    return j;
}

EquivalenceReport decomposition_equivalence(const FiniteTree& tree,
                                            const EnvironmentWord& word,
                                            TreeRegime regime) {
    const std::size_t depth = tree.depth;
    const std::size_t dim = tree.vertexCount();
    const double sign = regime == TreeRegime::adjacency ? -1.0 : 1.0;

    const Eigen::MatrixXd dense = dense_operator(tree, word, regime);
    const std::vector<double> denseEigs = sorted_eigs(dense);

    // Block eigenvalues with multiplicities: n = 0 once, n >= 1 with
    // genCounts[n-1] * (c_{n-1} - 1) copies each.
    std::vector<double> blockEigs;
    std::vector<std::size_t> blockOf;
    for (std::size_t n = 0; n <= depth; ++n) {
        const long long mult =
            n == 0 ? 1 : tree.genCounts[n - 1] * (tree.childCounts[n - 1] - 1);
        if (mult == 0) continue;
        const JacobiMatrix block =
            truncated_jacobi_block(word, n, depth + 1 - n, regime);
        const std::vector<double> eigs = block.eigenvalues();
        for (long long c = 0; c < mult; ++c)
            for (double e : eigs) {
                blockEigs.push_back(sign * e);
                blockOf.push_back(n);
            }
    }

    EquivalenceReport rep;
    if (blockEigs.size() != dim) {
        rep.pass = false;
        rep.maxEigGap = 1e308;
        return rep;
    }
    std::vector<std::size_t> order(dim);
    for (std::size_t i = 0; i < dim; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return blockEigs[a] < blockEigs[b]; });
    for (std::size_t i = 0; i < dim; ++i) {
        const double gap = std::abs(blockEigs[order[i]] - denseEigs[i]);
        if (gap > rep.maxEigGap) {
            rep.maxEigGap = gap;
            rep.worstBlock = blockOf[order[i]];
        }
    }

    // Conjugation: Phi^T J Phi must be the block-diagonal of the (signed)
    // Jacobi blocks, chain by chain.
    const BreuerBasis basis = breuer_basis(tree, word);
    const Eigen::MatrixXd phi = basis.as_matrix(dim);
    const Eigen::MatrixXd conj = phi.transpose() * dense * phi;
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::Index off = 0;
    for (const auto& chain : basis.chains) {
        const std::size_t len = chain.vectors.size();
        const JacobiMatrix block =
            truncated_jacobi_block(word, chain.startGen, len, regime);
        Eigen::MatrixXd bd = sign * block.dense();
        if (regime == TreeRegime::schroedinger) {
            // The basis extends with positive weights, so the conjugated
            // couplings carry the operator's -1 sign: flip the off-diagonals
            // (an alternating-sign gauge; spectra are unchanged).
            for (Eigen::Index i = 0; i + 1 < static_cast<Eigen::Index>(len); ++i) {
                bd(i, i + 1) = -bd(i, i + 1);
                bd(i + 1, i) = -bd(i + 1, i);
            }
        }
        expected.block(off, off, len, len) = bd;
        off += static_cast<Eigen::Index>(len);
    }
    rep.conjugationResidual = (conj - expected).cwiseAbs().maxCoeff();
    rep.pass = rep.maxEigGap < 1e-8 && rep.conjugationResidual < 1e-9;
    return rep;
}

std::string EquivalenceReport::to_json() const {
    nlohmann::json j;
    j["pass"] = pass;
    j["maxEigGap"] = maxEigGap;
    j["conjugationResidual"] = conjugationResidual;
    j["worstBlock"] = worstBlock;
    return j.dump();
}

DiscreteLocalizationReport discrete_localization_suite(
    const SingleGenDistribution& dist, DiscreteRegime regime,
    std::pair<double, double> window, std::size_t depth, int trials,
    std::uint64_t seed) {
    const ExceptionalSet exc = exceptional_set_discrete(dist, regime);
    for (double e : exc.energies)
        if (e > window.first - 0.1 && e < window.second + 0.1)
            throw std::invalid_argument(
                "discrete_localization_suite: window within 0.1 of an "
                "exceptional energy");
    if (trials < 1)
        throw std::invalid_argument("discrete_localization_suite: trials >= 1");

    DiscreteLocalizationReport rep;
    rep.windowCenter = 0.5 * (window.first + window.second);
    const TreeRegime treg = regime == DiscreteRegime::adjacency
                                ? TreeRegime::adjacency
                                : TreeRegime::schroedinger;
    const double sign = treg == TreeRegime::adjacency ? -1.0 : 1.0;

    std::vector<double> rates;
    EnvironmentWord word0;
    Eigen::MatrixXd vecs0;
    Eigen::VectorXd vals0;
    for (int t = 0; t < trials; ++t) {
        const EnvironmentWord word =
            sample_word(dist, depth + 1, substream_seed(seed, t));
        const JacobiMatrix block =
            truncated_jacobi_block(word, 0, depth + 1, treg);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sign * block.dense());
        if (t == 0) {
            word0 = word;
            vecs0 = es.eigenvectors();
            vals0 = es.eigenvalues();
        }
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
            const double ev = es.eigenvalues()[k];
            if (ev < window.first || ev > window.second) continue;
            const Eigen::VectorXd& v = es.eigenvectors().col(k);
            Eigen::Index peak = 0;
            const double peakVal = v.cwiseAbs().maxCoeff(&peak);
            // Entries below ~1e-13 of the peak are diagonalization noise, not
            // decay; restrict the fit to the genuine range and skip the
            // curved region near the peak.
            std::vector<double> ds, ls;
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                const double a = std::abs(v[i]);
                if (a < 1e-13 * peakVal) continue;
                ds.push_back(std::abs(static_cast<double>(i - peak)));
                ls.push_back(std::log(a));
            }
            const double dMax = *std::max_element(ds.begin(), ds.end());
            std::vector<double> xs, ys;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                if (ds[i] < 0.15 * dMax) continue;
                xs.push_back(ds[i]);
                ys.push_back(ls[i]);
            }
            if (xs.size() < 10) continue;
            rates.push_back(-fit_line(xs, ys).slope);
        }
    }
    if (rates.empty())
        throw std::invalid_argument(
            "discrete_localization_suite: no eigenvalues in the window");
    std::sort(rates.begin(), rates.end());
    rep.medianFitRate = rates[rates.size() / 2];

    const OneStepMap map = OneStepMap::discrete();
    rep.lyapunov =
        lyapunov_mc(sign * rep.windowCenter, dist, map, 10000, 50,
                    substream_seed(seed, 0x999ULL))
            .value;
    rep.ratesAgree =
        std::abs(rep.medianFitRate - rep.lyapunov) <= 0.25 * rep.lyapunov;

    // Off-diagonal kernel decay of the trial-0 block. Values below ~1e-13
    // of the on-site kernel are noise and excluded from the fit.
    const Eigen::Index N = vals0.size();
    const Eigen::Index x0 = N / 2;
    auto kernel_at = [&](Eigen::Index a, Eigen::Index b) {
        double kern = 0.0;
        for (Eigen::Index k = 0; k < N; ++k) {
            if (vals0[k] < window.first || vals0[k] > window.second) continue;
            kern += std::abs(vecs0(a, k) * vecs0(b, k));
        }
        return kern;
    };
    const double kernFloor = 1e-13 * kernel_at(x0, x0);
    std::vector<double> kx, ky;
    for (Eigen::Index y = 0; y < N; ++y) {
        const double d = std::abs(static_cast<double>(y - x0));
        if (d < 10.0 || d > static_cast<double>(N) / 2.0 - 10.0) continue;
        const double kern = kernel_at(x0, y);
        if (kern < kernFloor) continue;
        kx.push_back(d);
        ky.push_back(std::log(kern));
    }
    if (kx.size() >= 10) {
        rep.kernelDecayRate = -fit_line(kx, ky).slope;
        rep.kernelDecays = rep.kernelDecayRate > 1e-3;
    }

    // Tree-lifted tail sums from the root: sum_{|x| >= R} of the kernel bound
    // picks up sqrt(w_o(g)) per generation.
    std::vector<double> halfLogW(N, 0.0);
    for (Eigen::Index g = 1; g < N; ++g)
        halfLogW[g] = halfLogW[g - 1] +
                      0.5 * std::log(static_cast<double>(word0.params[g - 1].b));
    const double rootFloor = 1e-13 * kernel_at(0, 0);
    std::vector<double> termLog(N, -1e308);
    Eigen::Index gMax = 0;
    for (Eigen::Index g = 0; g < N; ++g) {
        const double kern = kernel_at(0, g);
        if (kern < rootFloor) continue;
        termLog[g] = halfLogW[g] + std::log(kern);
        gMax = g;
    }
    std::vector<double> rx, ry;
    for (Eigen::Index R = gMax / 4; R <= 3 * gMax / 4; ++R) {
        double mx = -1e308;
        for (Eigen::Index g = R; g <= gMax; ++g) mx = std::max(mx, termLog[g]);
        if (mx <= -1e307) continue;
        double s = 0.0;
        for (Eigen::Index g = R; g <= gMax; ++g)
            s += std::exp(termLog[g] - mx);
        rx.push_back(static_cast<double>(R));
        ry.push_back(mx + std::log(s));
    }
    if (rx.size() >= 10) {
        rep.treeTailSlope = fit_line(rx, ry).slope;
        rep.treeTailDecays = rep.treeTailSlope < -1e-3;
    }
    return rep;
}

std::string DiscreteLocalizationReport::to_json() const {
    nlohmann::json j;
    j["windowCenter"] = windowCenter;
    j["lyapunov"] = lyapunov;
    j["medianFitRate"] = medianFitRate;
    j["kernelDecayRate"] = kernelDecayRate;
    j["treeTailSlope"] = treeTailSlope;
    j["ratesAgree"] = ratesAgree;
    j["kernelDecays"] = kernelDecays;
    j["treeTailDecays"] = treeTailDecays;
    return j.dump();
}

std::vector<std::pair<double, double>> almost_sure_spectrum_discrete(
    const SingleGenDistribution& dist, std::size_t periodLimit,
    std::pair<double, double> window) {
    if (periodLimit < 1)
        throw std::invalid_argument("almost_sure_spectrum_discrete: periodLimit >= 1");
    const auto& atoms = dist.atoms();
    std::vector<std::pair<double, double>> bands;
    std::vector<std::size_t> cell;
    const OneStepMap map = OneStepMap::discrete();
    std::function<void()> visit = [&]() {
        auto trace = [&](double E) {
            Mat2 m = Mat2::identity();
            double prevP = atoms[cell.back()].ell;  // periodic predecessor
            for (std::size_t idx : cell) {
                m = map(E, atoms[idx], prevP) * m;
                prevP = atoms[idx].ell;
            }
            return m.trace();
        };
        for (const auto& b : trace_bands(trace, window)) bands.push_back(b);
    };
    std::function<void(std::size_t)> grow = [&](std::size_t len) {
        if (!cell.empty()) visit();
        if (len == periodLimit) return;
        for (std::size_t a = 0; a < atoms.size(); ++a) {
            cell.push_back(a);
            grow(len + 1);
            cell.pop_back();
        }
    };
    for (std::size_t a = 0; a < atoms.size(); ++a) {
        cell.push_back(a);
        grow(1);
        cell.pop_back();
    }
    return merge_bands(std::move(bands));
}

std::vector<std::pair<double, double>> periodic_spectrum_continuum(
    const std::vector<SiteParams>& cell, std::pair<double, double> window) {
    if (cell.empty())
        throw std::invalid_argument("periodic_spectrum_continuum: empty cell");
    auto trace = [&](double E) {
        Mat2 m = Mat2::identity();
        for (const auto& s : cell) m = continuum_step(E, s) * m;
        return m.trace();
    };
    return merge_bands(trace_bands(trace, window));
}

std::string bands_csv(const std::vector<std::pair<double, double>>& bands) {
    std::ostringstream os;
    os.precision(17);
    os << "lo,hi\n";
    for (const auto& b : bands) os << b.first << ',' << b.second << '\n';
    return os.str();
}

}  // namespace radloc
