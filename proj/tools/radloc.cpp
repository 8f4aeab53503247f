#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "radloc/cocycle.hpp"
#include "radloc/discrete.hpp"
#include "radloc/furstenberg.hpp"
#include "radloc/halfline.hpp"
#include "radloc/model.hpp"
#include "radloc/treeops.hpp"

using namespace radloc;

namespace {

struct RunConfig {
    std::string model = "rbm";
    std::vector<double> atoms = {2, 3};
    int d = 2;  // fixed branching for rlm/rkm/discrete-rwm/discrete-rso
    double windowLo = 0.5, windowHi = 40.0;
    int grid = 200;
    int n = 10000;
    int trials = 50;
    int depth = 6;
    int period = 3;
    double p = 2.0;
    double radius = 1.0;
    std::uint64_t seed = 1;
    std::string out;
    std::string distJson;  // custom model
    int threads = 1;

    nlohmann::json echo() const {
        nlohmann::json j;
        j["model"] = model;
        j["atoms"] = atoms;
        j["d"] = d;
        j["window"] = {windowLo, windowHi};
        j["grid"] = grid;
        j["n"] = n;
        j["trials"] = trials;
        j["depth"] = depth;
        j["period"] = period;
        j["p"] = p;
        j["radius"] = radius;
        j["seed"] = seed;
        j["threads"] = threads;
        return j;
    }
};

bool is_discrete(const std::string& model) {
    return model.rfind("discrete-", 0) == 0;
}

SingleGenDistribution make_distribution(const RunConfig& c) {
    if (c.model == "custom") {
        if (c.distJson.empty())
            throw std::invalid_argument("custom model requires a distribution");
        return SingleGenDistribution::from_json(c.distJson);
    }
    std::vector<SiteParams> sites;
    for (double a : c.atoms) {
        if (c.model == "rbm" || c.model == "discrete-rbm")
            sites.push_back({static_cast<int>(a), 1.0, 0.0});
        else if (c.model == "rlm" || c.model == "discrete-rwm")
            sites.push_back({c.d, a, 0.0});
        else if (c.model == "rkm" || c.model == "discrete-rso")
            sites.push_back({c.d, 1.0, a});
        else
            throw std::invalid_argument("unknown model preset: " + c.model);
    }
    const std::vector<double> w(sites.size(), 1.0 / sites.size());
    return SingleGenDistribution(std::move(sites), w);
}

void emit(const RunConfig& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    // Write whole, then rename: readers never see a partial file.
    const std::string tmp = c.out + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open output file: " + tmp);
        os << text;
    }
    if (std::rename(tmp.c_str(), c.out.c_str()) != 0)
        throw std::runtime_error("cannot move output into place: " + c.out);
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

int cmd_lyapunov(const RunConfig& c) {
    const SingleGenDistribution dist = make_distribution(c);
    const OneStepMap map =
        is_discrete(c.model) ? OneStepMap::discrete() : OneStepMap::continuum();
    std::vector<double> grid(c.grid);
    for (int i = 0; i < c.grid; ++i)
        grid[i] = c.windowLo +
                  (c.windowHi - c.windowLo) * i / std::max(1, c.grid - 1);
    const auto curve = lyapunov_curve(grid, dist, map, c.n, c.trials, c.seed);
    std::ostringstream os;
    os << "# " << c.echo().dump() << "\n";
    os << "energy,value,stderr,n,trials,seed\n";
    for (const auto& e : curve)
        os << fmt(e.energy) << ',' << fmt(e.value) << ',' << fmt(e.stderr_)
           << ',' << e.n << ',' << e.trials << ',' << e.seed << '\n';
    emit(c, os.str());
    return 0;
}

int cmd_exceptional(const RunConfig& c) {
    const SingleGenDistribution dist = make_distribution(c);
    ExceptionalSet set;
    if (is_discrete(c.model)) {
        const DiscreteRegime regime = c.model == "discrete-rso"
                                          ? DiscreteRegime::schroedinger
                                          : DiscreteRegime::adjacency;
        set = exceptional_set_discrete(dist, regime);
    } else {
        set = exceptional_set_continuum(dist, {c.windowLo, c.windowHi});
    }
    nlohmann::json j;
    j["config"] = c.echo();
    j["exceptionalSet"] = nlohmann::json::parse(set.to_json());
    emit(c, j.dump(2) + "\n");
    return 0;
}

int cmd_spectrum(const RunConfig& c) {
    const SingleGenDistribution dist = make_distribution(c);
    std::vector<std::pair<double, double>> bands;
    if (is_discrete(c.model)) {
        bands = almost_sure_spectrum_discrete(dist, c.period,
                                              {c.windowLo, c.windowHi});
    } else {
        // Continuum surrogate: union of period-1 band spectra over the atoms.
        for (const auto& atom : dist.atoms()) {
            const auto b =
                periodic_spectrum_continuum({atom}, {c.windowLo, c.windowHi});
            bands.insert(bands.end(), b.begin(), b.end());
        }
        std::sort(bands.begin(), bands.end());
        std::vector<std::pair<double, double>> merged;
        for (const auto& b : bands) {
            if (!merged.empty() && b.first <= merged.back().second + 1e-9)
                merged.back().second = std::max(merged.back().second, b.second);
            else
                merged.push_back(b);
        }
        bands = std::move(merged);
    }
    std::ostringstream os;
    os << "# " << c.echo().dump() << "\n" << bands_csv(bands);
    emit(c, os.str());
    return 0;
}

int cmd_truncspec(const RunConfig& c) {
    const SingleGenDistribution dist = make_distribution(c);
    const EnvironmentWord word = sample_word(dist, c.n, c.seed);
    const auto spec = truncated_eigenvalues(
        word, c.n, {c.windowLo, c.windowHi},
        default_grid_step({c.windowLo, c.windowHi}, c.n));
    std::ostringstream os;
    os << "# " << c.echo().dump() << "\n" << spectrum_csv(spec);
    emit(c, os.str());
    return 0;
}

int cmd_decay(const RunConfig& c) {
    const SingleGenDistribution dist = make_distribution(c);
    const EnvironmentWord word = sample_word(dist, c.n, c.seed);
    const TreeGeometry geo = TreeGeometry::make(word, 1);
    const auto spec = truncated_eigenvalues(
        word, c.n, {c.windowLo, c.windowHi},
        default_grid_step({c.windowLo, c.windowHi}, c.n));
    if (spec.eigenvalues.empty())
        throw std::invalid_argument("decay: no eigenvalues in the window");
    const double mid = 0.5 * (c.windowLo + c.windowHi);
    double ek = spec.eigenvalues.front();
    for (double e : spec.eigenvalues)
        if (std::abs(e - mid) < std::abs(ek - mid)) ek = e;
    const HalfLineProfile phi = eigenfunction_profile(word, c.n, ek);
    const DecayFit fit = decay_rate_fit(phi, geo);
    const LyapunovEstimate lyap = lyapunov_mc(
        ek, dist, OneStepMap::continuum(), c.n, c.trials, c.seed);
    nlohmann::json j;
    j["config"] = c.echo();
    j["energy"] = ek;
    j["zeta"] = fit.zeta;
    j["lambdaHat"] = fit.lambdaHat;
    j["rSquared"] = fit.rSquared;
    j["localized"] = fit.localized;
    j["lyapunovRate"] = continuum_rate(lyap.value, dist);
    emit(c, j.dump(2) + "\n");
    return 0;
}

int cmd_moment(const RunConfig& c) {
    const SingleGenDistribution dist = make_distribution(c);
    const EnvironmentWord word = sample_word(dist, c.depth, c.seed);
    const double tree = tree_dynamical_moment(
        word, c.depth, {c.windowLo, c.windowHi}, c.p, c.radius);
    const double half = dynamical_moment_bound(
        word, c.depth, {c.windowLo, c.windowHi}, c.p, c.radius);
    nlohmann::json j;
    j["config"] = c.echo();
    j["treeMoment"] = tree;
    j["halfLineMoment"] = half;
    emit(c, j.dump(2) + "\n");
    return 0;
}

int cmd_equiv(const RunConfig& c) {
    const SingleGenDistribution dist = make_distribution(c);
    const EnvironmentWord word = sample_word(dist, c.depth + 1, c.seed);
    const FiniteTree tree = build_finite_tree(word, c.depth);
    const TreeRegime regime = c.model == "discrete-rso"
                                  ? TreeRegime::schroedinger
                                  : TreeRegime::adjacency;
    const EquivalenceReport rep = decomposition_equivalence(tree, word, regime);
    nlohmann::json j;
    j["config"] = c.echo();
    j["report"] = nlohmann::json::parse(rep.to_json());
    emit(c, j.dump(2) + "\n");
    return 0;
}

void apply_config_file(RunConfig& c, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read config file: " + path);
    nlohmann::json j;
    is >> j;
    if (j.contains("model")) c.model = j["model"].get<std::string>();
    if (j.contains("atoms")) c.atoms = j["atoms"].get<std::vector<double>>();
    if (j.contains("d")) c.d = j["d"].get<int>();
    if (j.contains("window")) {
        c.windowLo = j["window"][0].get<double>();
        c.windowHi = j["window"][1].get<double>();
    }
    if (j.contains("grid")) c.grid = j["grid"].get<int>();
    if (j.contains("n")) c.n = j["n"].get<int>();
    if (j.contains("trials")) c.trials = j["trials"].get<int>();
    if (j.contains("depth")) c.depth = j["depth"].get<int>();
    if (j.contains("period")) c.period = j["period"].get<int>();
    if (j.contains("p")) c.p = j["p"].get<double>();
    if (j.contains("radius")) c.radius = j["radius"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("distribution")) c.distJson = j["distribution"].dump();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radloc: transfer-matrix diagnostics for random radial trees"};
    app.require_subcommand(1);

    RunConfig cfg;
    if (const char* env = std::getenv("RADLOC_THREADS"))
        cfg.threads = std::max(1, std::atoi(env));

    std::string configPath;
    std::string windowSpec;
    auto addCommon = [&](CLI::App* sub) {
        sub->add_option("--model", cfg.model,
                        "rbm|rlm|rkm|discrete-rbm|discrete-rwm|discrete-rso|custom");
        sub->add_option("--atoms", cfg.atoms, "atom values (meaning per model)")
            ->delimiter(',');
        sub->add_option("--d", cfg.d, "fixed branching for rlm/rkm presets");
        sub->add_option("--window", windowSpec, "energy window lo:hi");
        sub->add_option("--grid", cfg.grid, "grid points");
        sub->add_option("--n", cfg.n, "word length / truncation depth");
        sub->add_option("--trials", cfg.trials, "Monte Carlo trials");
        sub->add_option("--depth", cfg.depth, "tree depth");
        sub->add_option("--period", cfg.period, "periodic cell length limit");
        sub->add_option("--p", cfg.p, "moment power");
        sub->add_option("--radius", cfg.radius, "support radius");
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--out", cfg.out, "output path (default stdout)");
        sub->add_option("--config", configPath, "JSON config overriding flags");
    };

    auto* lyap = app.add_subcommand("lyapunov", "Lyapunov exponent curve (CSV)");
    auto* exc = app.add_subcommand("exceptional", "exceptional energy set (JSON)");
    auto* spect = app.add_subcommand("spectrum", "almost-sure spectrum bands (CSV)");
    auto* trunc = app.add_subcommand("truncspec", "truncated eigenvalues (CSV)");
    auto* decay = app.add_subcommand("decay", "eigenfunction decay fit (JSON)");
    auto* moment = app.add_subcommand("moment", "dynamical moment bounds (JSON)");
    auto* equiv = app.add_subcommand("equiv", "decomposition equivalence (JSON)");
    for (auto* sub : {lyap, exc, spect, trunc, decay, moment, equiv}) addCommon(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (!configPath.empty()) apply_config_file(cfg, configPath);
        if (!windowSpec.empty()) {
            const auto colon = windowSpec.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("window must be lo:hi");
            cfg.windowLo = std::stod(windowSpec.substr(0, colon));
            cfg.windowHi = std::stod(windowSpec.substr(colon + 1));
        }
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
        return 2;
    }

    try {
        if (lyap->parsed()) return cmd_lyapunov(cfg);
        if (exc->parsed()) return cmd_exceptional(cfg);
        if (spect->parsed()) return cmd_spectrum(cfg);
        if (trunc->parsed()) return cmd_truncspec(cfg);
        if (decay->parsed()) return cmd_decay(cfg);
        if (moment->parsed()) return cmd_moment(cfg);
        if (equiv->parsed()) return cmd_equiv(cfg);
    } catch (const std::invalid_argument& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
        return 2;
    }
    return 2;
}
