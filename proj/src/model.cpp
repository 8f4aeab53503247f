#include "radloc/model.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace radloc {

void validate_site(const SiteParams& s) {
    if (s.b < 1) throw std::invalid_argument("SiteParams: branching must be >= 1");
    if (!(s.ell > 0.0)) throw std::invalid_argument("SiteParams: ell must be > 0");
    if (!std::isfinite(s.ell) || !std::isfinite(s.q))
        throw std::invalid_argument("SiteParams: non-finite entry");
}

SingleGenDistribution::SingleGenDistribution(std::vector<SiteParams> atoms,
                                             std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.empty()) throw std::invalid_argument("distribution: empty support");
    if (atoms_.size() != weights_.size())
        throw std::invalid_argument("distribution: atoms/weights size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        validate_site(atoms_[i]);
        if (!(weights_[i] > 0.0))
            throw std::invalid_argument("distribution: weights must be positive");
        sum += weights_[i];
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("distribution: weights must sum to 1");
    bool twoDistinct = false;
    for (std::size_t i = 1; i < atoms_.size(); ++i)
        if (atoms_[i] != atoms_[0]) twoDistinct = true;
    if (!twoDistinct)
        throw std::invalid_argument(
            "distribution: support must contain at least two distinct points");
    cdf_.resize(weights_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        acc += weights_[i];
        cdf_[i] = acc;
    }
    cdf_.back() = 1.0;
}

const SiteParams& SingleGenDistribution::pick(double u01) const {
    for (std::size_t i = 0; i < cdf_.size(); ++i)
        if (u01 < cdf_[i]) return atoms_[i];
    return atoms_.back();
}

double SingleGenDistribution::mean_length() const {
    double m = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) m += weights_[i] * atoms_[i].ell;
    return m;
}

std::string SingleGenDistribution::to_json() const {
    nlohmann::json j;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        j["atoms"].push_back({{"b", atoms_[i].b},
                              {"ell", atoms_[i].ell},
                              {"q", atoms_[i].q},
                              {"w", weights_[i]}});
    }
    return j.dump();
}

SingleGenDistribution SingleGenDistribution::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<SiteParams> atoms;
    std::vector<double> weights;
    for (const auto& a : j.at("atoms")) {
        atoms.push_back({a.at("b").get<int>(), a.at("ell").get<double>(),
                         a.at("q").get<double>()});
        weights.push_back(a.at("w").get<double>());
    }
    return SingleGenDistribution(std::move(atoms), std::move(weights));
}

std::string EnvironmentWord::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["origin"] = origin == WordOrigin::sampled    ? "sampled"
                  : origin == WordOrigin::periodic ? "periodic"
                                                   : "explicit";
    for (const auto& s : params)
        j["params"].push_back({{"b", s.b}, {"ell", s.ell}, {"q", s.q}});
    return j.dump();
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x51ed2701a8b9c3d4ULL));
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (int i = 0; i < 4; ++i) {
        x = splitmix64(x);
        s_[i] = x;
    }
}

static inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

std::uint64_t Rng::next_u64() {
    // xoshiro256**
    const std::uint64_t result = rotl64(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl64(s_[3], 45);
    return result;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    double u1, u2;
    do {
        u1 = next_double();
    } while (u1 <= 0.0);
    u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(a);
    have_cached_normal_ = true;
    return r * std::cos(a);
}

EnvironmentWord sample_word(const SingleGenDistribution& dist, std::size_t n,
                            std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_word: n must be >= 1");
    Rng rng(seed);
    EnvironmentWord w;
    w.seed = seed;
    w.origin = WordOrigin::sampled;
    w.params.reserve(n);
    for (std::size_t i = 0; i < n; ++i) w.params.push_back(dist.pick(rng.next_double()));
    return w;
}

EnvironmentWord periodic_word(const std::vector<SiteParams>& cell,
                              std::size_t copies) {
    if (cell.empty()) throw std::invalid_argument("periodic_word: empty cell");
    if (copies < 1) throw std::invalid_argument("periodic_word: copies must be >= 1");
    EnvironmentWord w;
    w.origin = WordOrigin::periodic;
    w.params.reserve(cell.size() * copies);
    for (std::size_t c = 0; c < copies; ++c)
        for (const auto& s : cell) w.params.push_back(s);
    return w;
}

std::vector<double> vertex_positions(const EnvironmentWord& word) {
    if (word.params.empty())
        throw std::invalid_argument("vertex_positions: empty word");
    std::vector<double> t(word.size() + 1);
    t[0] = 0.0;
    for (std::size_t j = 0; j < word.size(); ++j) t[j + 1] = t[j] + word.params[j].ell;
    return t;
}

// Word entries carry generations 1..N; the root generation is described
// by the rootBranching convention (b_0 = 1 on continuum trees).
double generation_weight(const EnvironmentWord& word, std::size_t n,
                         int rootBranching) {
    if (n > word.size()) throw std::out_of_range("generation_weight: n out of range");
    if (n == 0) return 1.0;
    double w = rootBranching;
    for (std::size_t k = 0; k + 2 <= n; ++k) w *= word.params[k].b;
    return w;
}

double multiplicity(const EnvironmentWord& word, std::size_t n) {
    if (n > word.size()) throw std::out_of_range("multiplicity: n out of range");
    if (n == 0) return 1.0;
    double m = 1.0;
    for (std::size_t k = 0; k + 2 <= n; ++k) m *= word.params[k].b;
    m *= (word.params[n - 1].b - 1);
    return m;
}

TreeGeometry TreeGeometry::make(const EnvironmentWord& word, int rootBranching) {
    TreeGeometry g;
    g.word = word;
    g.positions = vertex_positions(word);
    g.genWeights.resize(word.size() + 1);
    for (std::size_t n = 0; n <= word.size(); ++n)
        g.genWeights[n] = generation_weight(word, n, rootBranching);
    g.multiplicities.resize(word.size() + 1);
    for (std::size_t n = 0; n <= word.size(); ++n)
        g.multiplicities[n] = multiplicity(word, n);
    return g;
}

}  // namespace radloc
