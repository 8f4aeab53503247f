#ifndef RADLOC_MODEL_HPP
#define RADLOC_MODEL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace radloc {

// One generation's parameter triple. In the continuum models b is the
// branching number, ell the edge length, q the Kirchhoff coupling. The
// discrete models reuse ell as the hopping weight p > 0.
struct SiteParams {
    int b = 1;
    double ell = 1.0;
    double q = 0.0;

    bool operator==(const SiteParams& o) const {
        return b == o.b && ell == o.ell && q == o.q;
    }
    bool operator!=(const SiteParams& o) const { return !(*this == o); }
};

void validate_site(const SiteParams& s);

// Finite atomic single-generation law. Weights must be positive and sum
// to 1 within 1e-12; the support must contain at least two distinct
// triples.
class SingleGenDistribution {
  public:
    SingleGenDistribution(std::vector<SiteParams> atoms,
                          std::vector<double> weights);

    const std::vector<SiteParams>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return atoms_.size(); }

    // Inverse-CDF draw from a uniform in [0,1).
    const SiteParams& pick(double u01) const;

    double mean_length() const;

    std::string to_json() const;
    static SingleGenDistribution from_json(const std::string& text);

  private:
    std::vector<SiteParams> atoms_;
    std::vector<double> weights_;
    std::vector<double> cdf_;
};

enum class WordOrigin { sampled, periodic, explicit_ };

// A finite realization of the environment: one SiteParams per generation.
struct EnvironmentWord {
    std::vector<SiteParams> params;
    std::uint64_t seed = 0;
    WordOrigin origin = WordOrigin::explicit_;

    std::size_t size() const { return params.size(); }
    const SiteParams& at(std::size_t i) const { return params.at(i); }

    std::string to_json() const;
};

// Deterministic stream utilities. Substreams are derived by hashing
// (seed, index) so parallel and serial runs agree.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

// Small deterministic generator (xorshift-type, seeded via splitmix64).
class Rng {
  public:
    explicit Rng(std::uint64_t seed);
    std::uint64_t next_u64();
    double next_double();  // uniform in [0,1)
    double next_normal();

  private:
    std::uint64_t s_[4];
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

EnvironmentWord sample_word(const SingleGenDistribution& dist, std::size_t n,
                            std::uint64_t seed);

EnvironmentWord periodic_word(const std::vector<SiteParams>& cell,
                              std::size_t copies);

// t_0 = 0, t_j = sum of the first j edge lengths.
std::vector<double> vertex_positions(const EnvironmentWord& word);

// w(0) = 1, w(n) = product of branching numbers over generations < n,
// with the root's branching replaced by rootBranching.
double generation_weight(const EnvironmentWord& word, std::size_t n,
                            int rootBranching);

// m(0) = 1, m(n) = b_0 ... b_{n-1} (b_n - 1).
double multiplicity(const EnvironmentWord& word, std::size_t n);

// Radial-tree combinatorics bundled with the generating word.
struct TreeGeometry {
    EnvironmentWord word;
    std::vector<double> positions;
    std::vector<double> genWeights;
    std::vector<double> multiplicities;

    static TreeGeometry make(const EnvironmentWord& word, int rootBranching);
};

}  // namespace radloc

#endif
