#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "radloc/cocycle.hpp"

using namespace radloc;

namespace {

const double kPi = M_PI;

SingleGenDistribution rbm23() {
    return SingleGenDistribution({{2, 1.0, 0.0}, {3, 1.0, 0.0}}, {0.5, 0.5});
}

SingleGenDistribution rlm13() {
    return SingleGenDistribution({{2, 1.0, 0.0}, {2, 3.0, 0.0}}, {0.5, 0.5});
}

double mat_dist(const Mat2& a, const Mat2& b) { return (a - b).norm2(); }

}  // namespace

TEST_CASE("rotation_block closed forms") {
    const Mat2 m = rotation_block(kPi * kPi, 1.0);
    CHECK(mat_dist(m, {-1.0, 0.0, 0.0, -1.0}) < 1e-12);

    const Mat2 z = rotation_block(0.0, 1.0);
    CHECK(mat_dist(z, {1.0, 1.0, 0.0, 1.0}) < 1e-15);

    const Mat2 h = rotation_block(-1.0, 1.0);
    CHECK(h.a11 == doctest::Approx(std::cosh(1.0)).epsilon(1e-14));
    CHECK(h.a12 == doctest::Approx(std::sinh(1.0)).epsilon(1e-14));
    CHECK(h.a21 == doctest::Approx(std::sinh(1.0)).epsilon(1e-14));
}

TEST_CASE("rotation_block determinant and series continuity near zero") {
    for (double E : {-50.0, -1e-6, -1e-12, 0.0, 1e-12, 1e-6, 3.7, 88.0})
        CHECK(std::abs(rotation_block(E, 0.7).det() - 1.0) < 1e-10);
    // The series branch must agree with the trig branch where both apply.
    const double E = 1e-9;  // below the series threshold
    CHECK(sE(E, 1.0) ==
          doctest::Approx(std::sin(std::sqrt(E)) / std::sqrt(E)).epsilon(1e-14));
    CHECK(cE(E, 1.0) == doctest::Approx(std::cos(std::sqrt(E))).epsilon(1e-14));
}

TEST_CASE("rotation_block semigroup property") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const double E = -20.0 + 120.0 * rng.next_double();
        const double a = 0.1 + rng.next_double();
        const double b = 0.1 + rng.next_double();
        const Mat2 lhs = rotation_block(E, a + b);
        const Mat2 rhs = rotation_block(E, b) * rotation_block(E, a);
        CHECK(mat_dist(lhs, rhs) < 1e-10);
    }
}

TEST_CASE("continuum_step closed forms") {
    const double s2 = std::sqrt(2.0);
    CHECK(mat_dist(continuum_step(kPi * kPi, {2, 1.0, 0.0}),
                   {-s2, 0.0, 0.0, -1.0 / s2}) < 1e-12);
    CHECK(mat_dist(continuum_step(0.0, {1, 1.0, 0.0}), {1.0, 1.0, 0.0, 1.0}) <
          1e-15);
    const Mat2 m = continuum_step(kPi * kPi / 4.0, {2, 1.0, 0.0});
    CHECK(mat_dist(m, {0.0, 2.0 * s2 / kPi, -kPi / (2.0 * s2), 0.0}) < 1e-12);
    CHECK(std::abs(m.trace()) < 1e-14);
}

TEST_CASE("discrete_step closed forms") {
    const double s2 = std::sqrt(2.0);
    CHECK(mat_dist(discrete_step(0.0, {2, 1.0, 0.0}, 1.0),
                   {0.0, -1.0 / s2, s2, 0.0}) < 1e-15);
    const double E = 1.7;
    CHECK(mat_dist(discrete_step(E, {1, 1.0, 0.0}, 0.0), {E, -1.0, 1.0, 0.0}) <
          1e-15);
    // b=2, p=1, q=1, prevP=1: beta = 3, alpha = sqrt(2).
    CHECK(mat_dist(discrete_step(3.0, {2, 1.0, 1.0}, 1.0),
                   {0.0, -1.0 / s2, s2, 0.0}) < 1e-15);
    CHECK_THROWS_AS(discrete_step(1.0, {2, 0.0, 0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("transfer_product of commuting diagonal steps") {
    const int k = 7;
    EnvironmentWord w;
    w.params.assign(k, {2, 1.0, 0.0});
    const ScaledMat2 prod = transfer_product(kPi * kPi, w, OneStepMap::continuum());
    const Mat2 dense = prod.dense();
    const double d1 = std::pow(-std::sqrt(2.0), k);
    const double d2 = std::pow(-1.0 / std::sqrt(2.0), k);
    CHECK(dense.a11 == doctest::Approx(d1).epsilon(1e-12));
    CHECK(dense.a22 == doctest::Approx(d2).epsilon(1e-12));
    CHECK(std::abs(dense.a12) < 1e-12);
    CHECK(std::abs(dense.a21) < 1e-12);
}

TEST_CASE("product determinants stay near 1") {
    const SingleGenDistribution dist = rbm23();
    for (std::uint64_t s = 0; s < 20; ++s) {
        const EnvironmentWord w = sample_word(dist, 1000, s);
        const ScaledMat2 p = transfer_product(3.3, w, OneStepMap::continuum());
        // det of the scaled part times exp(2 logScale) is the true det.
        const double det = p.m.det() * std::exp(2.0 * p.logScale);
        CHECK(std::abs(det - 1.0) < 1e-9 * 1000);
    }
}

TEST_CASE("log-scaled product matches the naive product when it fits") {
    const EnvironmentWord w = sample_word(rbm23(), 40, 11);
    const double E = -2.0;  // hyperbolic growth, still in range at n=40
    Mat2 naive = Mat2::identity();
    double prevP = 0.0;
    for (const auto& s : w.params) {
        naive = continuum_step(E, s) * naive;
        (void)prevP;
    }
    const Mat2 dense = transfer_product(E, w, OneStepMap::continuum()).dense();
    CHECK(mat_dist(dense, naive) / naive.norm2() < 1e-8);
}

TEST_CASE("norm2 agrees with the frobenius bounds") {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const Mat2 m{rng.next_normal(), rng.next_normal(), rng.next_normal(),
                     rng.next_normal()};
        const double n2 = m.norm2();
        CHECK(n2 <= m.frob() + 1e-12);
        CHECK(n2 >= m.frob() / std::sqrt(2.0) - 1e-12);
    }
}

TEST_CASE("lyapunov positive at a nonexceptional RBM energy") {
    const LyapunovEstimate est =
        lyapunov_mc(4.0, rbm23(), OneStepMap::continuum(), 10000, 50, 1);
    CHECK(est.value > 3.0 * est.stderr_);
    CHECK(est.value > -3.0 * est.stderr_);  // nonnegativity up to noise
}

TEST_CASE("lyapunov vanishes at the RLM elliptic energy") {
    const LyapunovEstimate est = lyapunov_mc(kPi * kPi / 4.0, rlm13(),
                                             OneStepMap::continuum(), 10000, 50, 2);
    CHECK(std::abs(est.value) < 0.02);
}

TEST_CASE("lyapunov determinism and curve plumbing") {
    const SingleGenDistribution dist = rbm23();
    const auto a = lyapunov_mc(4.0, dist, OneStepMap::continuum(), 500, 10, 3);
    const auto b = lyapunov_mc(4.0, dist, OneStepMap::continuum(), 500, 10, 3);
    CHECK(a.value == b.value);
    const auto curve =
        lyapunov_curve({1.0, 4.0, 7.0}, dist, OneStepMap::continuum(), 500, 10, 3);
    REQUIRE(curve.size() == 3);
    CHECK(curve[1].energy == 4.0);
}

TEST_CASE("continuum_rate divides by the mean length") {
    CHECK(continuum_rate(0.6, rbm23()) == doctest::Approx(0.6));
    CHECK(continuum_rate(0.6, rlm13()) == doctest::Approx(0.3));
    CHECK(continuum_rate(0.0, rlm13()) == 0.0);
}

TEST_CASE("lipschitz probe") {
    const EnvironmentWord w1 = sample_word(rbm23(), 20, 4);
    const EnvironmentWord w2 = sample_word(rbm23(), 20, 5);
    SUBCASE("identical inputs give zero on both sides") {
        const LipschitzProbe p =
            lipschitz_probe(2.0, 2.0, w1, w1, OneStepMap::continuum());
        CHECK(p.lhs == 0.0);
        CHECK(p.bound == 0.0);
    }
    SUBCASE("finite-difference slope stabilizes") {
        double prev = -1.0;
        for (double h : {1e-3, 1e-4, 1e-5}) {
            const LipschitzProbe p =
                lipschitz_probe(2.0, 2.0 + h, w1, w1, OneStepMap::continuum());
            const double slope = p.lhs / h;
            if (prev > 0.0) CHECK(std::abs(slope - prev) / prev < 0.05);
            prev = slope;
        }
    }
    SUBCASE("lhs below the telescoping bound") {
        const LipschitzProbe p =
            lipschitz_probe(2.0, 2.3, w1, w2, OneStepMap::continuum());
        CHECK(p.lhs <= p.bound);
    }
}

TEST_CASE("ldt deviation probabilities decay") {
    const auto probs = ldt_empirical(4.0, rbm23(), OneStepMap::continuum(), 0.1,
                                     {25, 50, 100}, 200, 7, {4, 1});
    REQUIRE(probs.size() == 3);
    CHECK(probs[0].second >= probs[2].second);
    // Huge eps: no deviations even at moderate n.
    const auto zero = ldt_empirical(4.0, rbm23(), OneStepMap::continuum(), 5.0,
                                    {50}, 200, 7, {4, 1});
    CHECK(zero[0].second == 0.0);
}

TEST_CASE("avalanche checker") {
    SUBCASE("aligned hyperbolic blocks") {
        std::vector<Mat2> blocks(5, Mat2::diag(100.0, 0.01));
        const AvalancheReport rep = avalanche_check(blocks, 100.0);
        CHECK(rep.hypothesesHold);
        CHECK(rep.lhs <= rep.rhs);
        CHECK(rep.lhs < 1e-10);
    }
    SUBCASE("a rotation block voids the hypotheses") {
        std::vector<Mat2> blocks(5, Mat2::diag(100.0, 0.01));
        blocks[2] = {0.0, -1.0, 1.0, 0.0};
        CHECK_FALSE(avalanche_check(blocks, 100.0).hypothesesHold);
    }
    SUBCASE("blocks from a positive-LE cocycle") {
        const SingleGenDistribution dist = rbm23();
        std::vector<Mat2> blocks;
        for (int j = 0; j < 10; ++j) {
            const EnvironmentWord w = sample_word(dist, 50, 100 + j);
            blocks.push_back(transfer_product(-1.0, w, OneStepMap::continuum()).dense());
        }
        const AvalancheReport rep = avalanche_check(blocks, 1e4);
        CHECK(rep.hypothesesHold);
        CHECK(rep.lhs <= rep.rhs);
    }
    CHECK_THROWS_AS(avalanche_check({Mat2::identity(), Mat2::identity()}, 10.0),
                    std::invalid_argument);
}

TEST_CASE("transfer products are analytic in E (stencil check)") {
    const EnvironmentWord w = sample_word(rbm23(), 15, 6);
    auto entry = [&](double E) {
        return transfer_product(E, w, OneStepMap::continuum()).dense().a11;
    };
    const double E0 = 2.5;
    double prevErr = 1e300;
    for (double h : {1e-2, 5e-3, 2.5e-3}) {
        // O(h^2) centered stencil against the 5-point reference derivative.
        const double d2 = (entry(E0 + h) - entry(E0 - h)) / (2.0 * h);
        const double d4 = (-entry(E0 + 2 * h) + 8 * entry(E0 + h) -
                           8 * entry(E0 - h) + entry(E0 - 2 * h)) /
                          (12.0 * h);
        const double err = std::abs(d2 - d4);
        CHECK(err < prevErr + 1e-14);
        prevErr = err;
    }
}

TEST_CASE("fit_line recovers a synthetic line") {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
        x.push_back(i);
        y.push_back(3.0 - 0.25 * i);
    }
    const LineFit f = fit_line(x, y);
    CHECK(f.slope == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.rSquared == doctest::Approx(1.0));
}
