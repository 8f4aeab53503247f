#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "radloc/furstenberg.hpp"

using namespace radloc;

namespace {
constexpr double pi = std::numbers::pi;
constexpr double pi2 = pi * pi;
}  // namespace

TEST_CASE("commutator is trace-free and records det") {
    Rng rng(17);
    const OneStepMap cmap = OneStepMap::continuum();
    for (int t = 0; t < 1000; ++t) {
        const double E = -5.0 + 60.0 * rng.next_double();
        SiteParams s1{2 + (int)(rng.next_u64() % 3), 0.5 + rng.next_double(),
                      rng.next_double()};
        SiteParams s2{2 + (int)(rng.next_u64() % 3), 0.5 + rng.next_double(),
                      rng.next_double()};
        if (s1 == s2) continue;
        const PairAnalysis pa = commutator(E, s1, s2, cmap);
        CHECK(std::abs(pa.g.trace()) < 1e-13 * std::max(1.0, pa.g.norm2()));
        CHECK(pa.detG == doctest::Approx(pa.g.det()).epsilon(1e-12));
    }
    CHECK_THROWS_AS(commutator(1.0, {2, 1.0, 0.0}, {2, 1.0, 0.0}, cmap),
                    std::invalid_argument);
}

TEST_CASE("branching-pair commutator determinant closed form") {
    const SiteParams s1{2, 1.0, 0.0}, s2{3, 1.0, 0.0};
    const OneStepMap cmap = OneStepMap::continuum();
    // det g = -(b1-b2)^2/(b1 b2) sin^2(sqrt(E)).
    CHECK(commutator(pi2 / 4.0, s1, s2, cmap).detG ==
          doctest::Approx(-1.0 / 6.0).epsilon(1e-12));
    CHECK(std::abs(commutator(pi2, s1, s2, cmap).detG) < 1e-10);
    for (double E = 0.1; E <= 100.0; E += 0.37) {
        const double want =
            -(1.0 / 6.0) * std::pow(std::sin(std::sqrt(E)), 2);
        CHECK(commutator(E, s1, s2, cmap).detG ==
              doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("length-pair commutator closed form") {
    // b=2, l1=1, l2=3 at E = pi^2/4: sin(2 * pi/2) = 0, so g vanishes.
    const Mat2 z = rlm_commutator_closed_form(pi2 / 4.0, 2, 1.0, 3.0);
    CHECK(std::abs(z.a11) < 1e-12);
    CHECK(std::abs(z.a12) < 1e-12);
    CHECK(std::abs(z.a21) < 1e-12);
    CHECK(std::abs(z.a22) < 1e-12);

    // b=2, l1=1, l2=2: upper-right entry (b-1) sin(pi/2)/(pi/2) = 2/pi.
    const Mat2 g = rlm_commutator_closed_form(pi2 / 4.0, 2, 1.0, 2.0);
    CHECK(g.a12 == doctest::Approx(2.0 / pi).epsilon(1e-12));
    CHECK(g.a11 == 0.0);
    CHECK(g.a22 == 0.0);

    // E = 0 limit: upper-right (b-1)(l2-l1), lower-left 0.
    const Mat2 g0 = rlm_commutator_closed_form(0.0, 3, 1.0, 2.5);
    CHECK(g0.a12 == doctest::Approx(2.0 * 1.5).epsilon(1e-12));
    CHECK(std::abs(g0.a21) < 1e-12);

    CHECK_THROWS_AS(rlm_commutator_closed_form(1.0, 2, 1.0, 1.0),
                    std::invalid_argument);

    // Agreement with the direct commutator on random tuples.
    Rng rng(99);
    const OneStepMap cmap = OneStepMap::continuum();
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const double E = -3.0 + 40.0 * rng.next_double();
        const int b = 2 + (int)(rng.next_u64() % 4);
        const double l1 = 0.5 + rng.next_double();
        const double l2 = l1 + 0.1 + rng.next_double();
        const Mat2 want = rlm_commutator_closed_form(E, b, l1, l2);
        const Mat2 got =
            commutator(E, {b, l1, 0.0}, {b, l2, 0.0}, cmap).g;
        const Mat2 d = got - want;
        worst = std::max(worst, d.frob());
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("continuum exceptional sets for the standard pairs") {
    const SingleGenDistribution rbm({{2, 1.0, 0.0}, {3, 1.0, 0.0}}, {0.5, 0.5});
    const ExceptionalSet er = exceptional_set_continuum(rbm, {0.5, 50.0});
    CHECK(er.kind == ExceptionalKind::continuumRBM);
    REQUIRE(er.energies.size() == 2);
    CHECK(er.energies[0] == doctest::Approx(pi2).epsilon(1e-9));
    CHECK(er.energies[1] == doctest::Approx(4.0 * pi2).epsilon(1e-9));

    const SingleGenDistribution rlm({{2, 1.0, 0.0}, {2, 3.0, 0.0}}, {0.5, 0.5});
    const ExceptionalSet el = exceptional_set_continuum(rlm, {0.5, 30.0});
    CHECK(el.kind == ExceptionalKind::continuumRLM);
    // (l1 - l2)^2 = 4, so the window (0.5, 30) holds k = 1..3 only.
    REQUIRE(el.energies.size() == 3);
    for (int k = 1; k <= 3; ++k)
        CHECK(el.energies[k - 1] ==
              doctest::Approx(pi2 * k * k / 4.0).epsilon(1e-9));

    // Certificate re-check: every reported energy has small |det g| under
    // the reporting pair.
    for (const auto& c : er.certificates) CHECK(c.residualDetG < 1e-8);
    for (const auto& c : el.certificates) CHECK(c.residualDetG < 1e-8);

    CHECK_THROWS_AS(exceptional_set_continuum(rbm, {5.0, 1.0}),
                    std::invalid_argument);
}

TEST_CASE("three-atom intersection can be empty") {
    // Pair zero sets: pi^2 k^2 (dl = 1), pi^2 k^2 / 2.56 (dl = 1.6),
    // pi^2 k^2 / 0.36 (dl = 0.6); no common member below 30.
    const SingleGenDistribution d(
        {{2, 1.0, 0.0}, {2, 2.0, 0.0}, {2, 2.6, 0.0}}, {0.3, 0.3, 0.4});
    const ExceptionalSet s = exceptional_set_continuum(d, {0.5, 30.0});
    CHECK(s.energies.empty());
}

TEST_CASE("discrete exceptional sets") {
    // Adjacency: always {0}, certified by the vanishing one-step traces.
    const SingleGenDistribution adj({{2, 1.0, 0.0}, {3, 1.0, 0.0}},
                                    {0.5, 0.5});
    const ExceptionalSet sa =
        exceptional_set_discrete(adj, DiscreteRegime::adjacency);
    CHECK(sa.kind == ExceptionalKind::discreteCase2);
    REQUIRE(sa.energies.size() == 1);
    CHECK(sa.energies[0] == 0.0);
    REQUIRE(sa.certificates.size() == 1);
    CHECK(sa.certificates[0].kind == CertificateKind::traceZeroPair);
    CHECK(sa.certificates[0].residualDetG < 1e-12);

    // Adjacency with all p sqrt(b) equal violates the hypothesis.
    const SingleGenDistribution bad({{2, 1.0, 0.0}, {8, 0.5, 0.0}},
                                    {0.5, 0.5});
    CHECK_THROWS_AS(exceptional_set_discrete(bad, DiscreteRegime::adjacency),
                    std::invalid_argument);

    // Case 1bi: (b1+1) q1 = (b2+1) q2 = 3.
    const SingleGenDistribution bi({{2, 1.0, 1.0}, {5, 1.0, 0.5}},
                                   {0.5, 0.5});
    const ExceptionalSet sb =
        exceptional_set_discrete(bi, DiscreteRegime::schroedinger);
    CHECK(sb.kind == ExceptionalKind::discreteCase1bi);
    REQUIRE(sb.energies.size() == 1);
    CHECK(sb.energies[0] == doctest::Approx(3.0).epsilon(1e-12));

    // Case 1a: equal branching, distinct couplings -> empty.
    const SingleGenDistribution a({{2, 1.0, 0.0}, {2, 1.0, 1.0}}, {0.5, 0.5});
    const ExceptionalSet s1a =
        exceptional_set_discrete(a, DiscreteRegime::schroedinger);
    CHECK(s1a.kind == ExceptionalKind::discreteCase1a);
    CHECK(s1a.energies.empty());

    // Case 1bii: distinct branching, non-matching couplings; det g is
    // affine in E so the set has exactly one member, re-certified below.
    const SingleGenDistribution bii({{2, 1.0, 1.0}, {3, 1.0, 1.0}},
                                    {0.5, 0.5});
    const ExceptionalSet s2 =
        exceptional_set_discrete(bii, DiscreteRegime::schroedinger);
    CHECK(s2.kind == ExceptionalKind::discreteCase1bii);
    REQUIRE(s2.energies.size() == 1);
    const double e1 = s2.energies[0];
    const PairAnalysis pa =
        commutator(e1, {2, 1.0, 1.0}, {3, 1.0, 1.0}, OneStepMap::discrete());
    CHECK(std::abs(pa.detG) < 1e-10);
}

TEST_CASE("elliptic boundedness at an exceptional energy") {
    const SiteParams s1{2, 1.0, 0.0}, s2{2, 3.0, 0.0};
    const OneStepMap cmap = OneStepMap::continuum();
    const EllipticProbe p =
        elliptic_boundedness_probe(pi2 / 4.0, s1, s2, cmap, 10000, 8, 3);
    CHECK(p.commNorm < 1e-12);
    CHECK(std::abs(p.traces.first) < 2.0);
    CHECK(std::abs(p.traces.second) < 2.0);
    CHECK(p.maxProductNorm < 50.0);

    // Away from the exceptional set the norms explode.
    const EllipticProbe q =
        elliptic_boundedness_probe(4.0, s1, s2, cmap, 2000, 8, 3);
    CHECK(q.maxProductNorm > 1e6);

    // Self-pair commutes exactly.
    const EllipticProbe r =
        elliptic_boundedness_probe(4.0, s1, s1, cmap, 10, 2, 3);
    CHECK(r.commNorm == 0.0);
}

TEST_CASE("zero Lyapunov exponent block identities") {
    const ZeroLeReport rep = zero_le_block_identity(2, 1.0, 5, 0.5, 11);
    CHECK(rep.e0 == doctest::Approx(3.0));
    CHECK(rep.identitiesHold);
    CHECK(rep.maxIdentityResidual < 1e-12);
    CHECK(rep.lyapunovSmall);
    CHECK(std::abs(rep.lyapunov.value) < 0.01);

    CHECK_THROWS_AS(zero_le_block_identity(2, 1.0, 2, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(zero_le_block_identity(2, 1.0, 3, 1.0),
                    std::invalid_argument);
}

TEST_CASE("exceptional set json shape") {
    const SingleGenDistribution rbm({{2, 1.0, 0.0}, {3, 1.0, 0.0}}, {0.5, 0.5});
    const ExceptionalSet er = exceptional_set_continuum(rbm, {0.5, 50.0});
    const std::string j = er.to_json();
    CHECK(j.find("\"kind\"") != std::string::npos);
    CHECK(j.find("\"energies\"") != std::string::npos);
    CHECK(j.find("\"certificates\"") != std::string::npos);
}
