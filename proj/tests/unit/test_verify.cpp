#include "doctest.h"
#include "helpers.hpp"

#include "twr/verify.hpp"

#include <cmath>

using namespace twr;

namespace {

ChannelSet random_scalar(CounterRng& rng) {
    auto tap = [&] { return Complex(rng.next_normal(), rng.next_normal()); };
    ChannelSet ch;
    ch.h1r = CMatrix::Constant(1, 1, tap());
    ch.h2r = CMatrix::Constant(1, 1, tap());
    ch.hr1 = CMatrix::Constant(1, 1, tap());
    ch.hr2 = CMatrix::Constant(1, 1, tap());
    return ch;
}

PowerLimits random_limits(CounterRng& rng) {
    return {0.1 + 4.9 * rng.next_open01(), 0.1 + 4.9 * rng.next_open01(), 0.1 + 4.9 * rng.next_open01()};
}

bool same(const Check& a, const Check& b) {
    return a.applicable == b.applicable && a.pass == b.pass && a.residual == b.residual;
}

}  // namespace

TEST_CASE("II-1 output passes every check") {
    const ChannelSet ch = test::scalar_channels(1, 1, 1, 1);
    const PowerLimits lim{1, 1, 3};
    const NetSolution s = network_optimize(ch, lim);
    REQUIRE(s.subcase.label == SubcaseLabel::II_1);
    const AuditReport r = check_necessary(ch, lim, s);
    CHECK(r.all_pass());
    CHECK(r.cond_13a_pair1.applicable);
    CHECK(r.cond_13b.applicable);
    CHECK_FALSE(r.full_relay_power.applicable);
    CHECK_FALSE(r.theorem1.applicable);
}

TEST_CASE("adding relay power to one mode breaks the rate balance") {
    const ChannelSet ch = test::scalar_channels(1, 1, 1, 1);
    const PowerLimits lim{1, 1, 3};
    NetSolution s = network_optimize(ch, lim);
    s.relay.b1(0, 0) += 0.5;
    const AuditReport r = check_necessary(ch, lim, s);
    CHECK_FALSE(r.cond_13b.pass);
    CHECK(r.cond_13b.residual > 0.0);
    CHECK_FALSE(r.all_pass());
}

TEST_CASE("I-1 and I-2 outputs satisfy their theorem predicates") {
    const ChannelSet ch = test::scalar_channels(1, 1, 1, 1);
    const NetSolution a = network_optimize(ch, {2, 2, 0.2});
    const AuditReport ra = check_necessary(ch, {2, 2, 0.2}, a);
    CHECK(ra.theorem1.applicable);
    CHECK(ra.theorem1.residual <= 1e-5);
    CHECK(ra.all_pass());

    const NetSolution b = network_optimize(ch, {10, 0.1, 2});
    const AuditReport rb = check_necessary(ch, {10, 0.1, 2}, b);
    CHECK(rb.full_relay_power.applicable);
    CHECK(std::abs(rb.full_relay_power.residual) <= 1e-6);
    CHECK(rb.theorem2_props.pass);
    CHECK(rb.lemma2.applicable);
    CHECK(rb.all_pass());
}

TEST_CASE("audit passes on random multi-antenna solves") {
    CounterRng rng(12);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const int nr = 1 + static_cast<int>(rng.next_u64() % 6);
        const int n1 = 1 + static_cast<int>(rng.next_u64() % 4);
        const int n2 = 1 + static_cast<int>(rng.next_u64() % 4);
        const ChannelSet ch = test::random_channels(900 + seed, n1, n2, nr);
        const PowerLimits lim = random_limits(rng);
        const NetSolution s = network_optimize(ch, lim);
        const AuditReport r = check_necessary(ch, lim, s);
        CAPTURE(subcase_name(s.subcase.label));
        for (const auto& [name, c] : r.entries()) {
            CAPTURE(name);
            CAPTURE(c.residual);
            CHECK(c.pass);
            CHECK(std::isfinite(c.residual));
        }
    }
}

TEST_CASE("audit is pure") {
    const ChannelSet ch = test::random_channels(4, 6, 4, 8);
    const NetSolution s = network_optimize(ch, {2, 2.5, 3});
    const AuditReport a = check_necessary(ch, {2, 2.5, 3}, s);
    const AuditReport b = check_necessary(ch, {2, 2.5, 3}, s);
    const auto ea = a.entries(), eb = b.entries();
    REQUIRE(ea.size() == eb.size());
    for (std::size_t k = 0; k < ea.size(); ++k) {
        CHECK(ea[k].first == eb[k].first);
        CHECK(same(ea[k].second, eb[k].second));
    }
}

TEST_CASE("oracle reproduces the II-1 closed form") {
    const OracleResult o = scalar_oracle(test::scalar_channels(1, 1, 1, 1), {1, 1, 3}, 300);
    CHECK(o.r_tw == doctest::Approx(std::log2(3.0) / 2.0).epsilon(1e-9));
    CHECK(o.q1 + o.q2 == doctest::Approx(2.0 * (std::sqrt(3.0) - 1.0)).epsilon(1e-6));
    CHECK(o.q1 + o.q2 <= 3.0);
}

TEST_CASE("oracle edge budgets") {
    const ChannelSet ch = test::scalar_channels(1, 1, 1, 1);
    const OracleResult z = scalar_oracle(ch, {1, 1, 0});
    CHECK(z.r_tw == 0.0);
    CHECK(z.total_power == 0.0);

    // With source 1 silent only one direction carries data.
    const ChannelSet c2 = test::scalar_channels(0.7, 1.3, 0.9, 1.1);
    const OracleResult o = scalar_oracle(c2, {0, 2, 1.5});
    const double direct = 0.5 * std::min(std::log2(1 + 1.69 * 2), std::log2(1 + 0.81 * 1.5));
    CHECK(o.r_tw == doctest::Approx(direct).epsilon(1e-9));
    CHECK(o.p1 == 0.0);
    CHECK(o.p2 <= 2.0);
}

TEST_CASE("oracle refinement moves the rate by at most the grid modulus") {
    CounterRng rng(31);
    for (int t = 0; t < 5; ++t) {
        const ChannelSet ch = random_scalar(rng);
        const PowerLimits lim = random_limits(rng);
        const OracleResult coarse = scalar_oracle(ch, lim, 100);
        const OracleResult fine = scalar_oracle(ch, lim, 200);
        CHECK(std::abs(fine.r_tw - coarse.r_tw) <= coarse.modulus + 1e-12);
        CHECK(fine.total_power <= coarse.total_power * (1 + 1e-3) + 1e-9);
        CHECK(fine.q1 + fine.q2 <= lim.prmax * (1 + 1e-12) + 1e-15);
        CHECK(fine.p1 <= lim.p1max);
        CHECK(fine.p2 <= lim.p2max);
    }
}

TEST_CASE("oracle rejects non-scalar channels") {
    CHECK_THROWS_AS(scalar_oracle(test::random_channels(1, 2, 1, 1), {1, 1, 1}), InvalidInput);
}

TEST_CASE("solver agrees with the oracle on random scalar instances") {
    CounterRng rng(44);
    for (int t = 0; t < 25; ++t) {
        const ChannelSet ch = random_scalar(rng);
        const PowerLimits lim = random_limits(rng);
        const NetSolution s = network_optimize(ch, lim);
        const OracleComparison c = compare_to_oracle(s, scalar_oracle(ch, lim));
        CAPTURE(subcase_name(s.subcase.label));
        CAPTURE(c.d_rate);
        CAPTURE(c.rel_power);
        CHECK(c.pass);
        CHECK(std::abs(c.d_rate) <= 1e-6);
        CHECK(std::abs(c.rel_power) <= 1e-4);
    }
}

TEST_CASE("comparison reports signed deltas") {
    const ChannelSet ch = test::scalar_channels(1, 1, 1, 1);
    const NetSolution s = network_optimize(ch, {1, 1, 3});
    OracleResult o = scalar_oracle(ch, {1, 1, 3});
    CHECK(compare_to_oracle(s, o).pass);

    o.r_tw += 0.05;
    o.total_power -= 1.0;
    const OracleComparison c = compare_to_oracle(s, o);
    CHECK_FALSE(c.pass);
    CHECK(c.d_rate == doctest::Approx(-0.05).epsilon(1e-9));
    CHECK(c.d_power > 0.9);
}
