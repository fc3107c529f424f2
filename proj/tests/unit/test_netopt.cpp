#include "doctest.h"
#include "helpers.hpp"

#include "twr/netopt.hpp"

#include <chrono>
#include <cmath>

using namespace twr;

namespace {

NetSolution solve_scalar(double p1, double p2, double pr, const NetOptions& opts = {}) {
    return network_optimize(test::scalar_channels(1, 1, 1, 1), {p1, p2, pr}, opts);
}

struct Instance {
    ChannelSet ch;
    PowerLimits limits;
};

// Mixed dimensions and budgets drawn from one seed stream.
std::vector<Instance> corpus(std::uint64_t seed, int count) {
    CounterRng rng(seed);
    std::vector<Instance> out;
    for (int t = 0; t < count; ++t) {
        ChannelSpec spec;
        spec.seed = seed * 1000 + static_cast<std::uint64_t>(t);
        spec.nr = 1 + static_cast<int>(rng.next_u64() % 6);
        spec.n1 = 1 + static_cast<int>(rng.next_u64() % 4);
        spec.n2 = 1 + static_cast<int>(rng.next_u64() % 4);
        spec.reciprocal = t % 3 == 1;
        if (t % 3 == 2) spec.v2 = 0.2;
        const PowerLimits lim{0.1 + 4.9 * rng.next_open01(), 0.1 + 4.9 * rng.next_open01(),
                              0.1 + 4.9 * rng.next_open01()};
        out.push_back({generate_channels(spec), lim});
    }
    return out;
}

bool is_pipeline(SubcaseLabel s) { return s == SubcaseLabel::I_2 || s == SubcaseLabel::II_4; }

}  // namespace

TEST_CASE("bisection bound") {
    CHECK(bisection_bound(1.0, 1e-6) == 22);
    CHECK(bisection_bound(12.0, 1e-6) == 26);
    CHECK(bisection_bound(1e-7, 1e-6) == 2);
}

TEST_CASE("unit channels with a generous relay land in II-1 with the closed form") {
    const NetSolution s = solve_scalar(1, 1, 3);
    CHECK(s.subcase.label == SubcaseLabel::II_1);
    CHECK(s.status == SolveStatus::Optimal);
    CHECK(s.powers.pr == doctest::Approx(2.0 * (std::sqrt(3.0) - 1.0)).epsilon(1e-9));
    CHECK(s.rates.r_tw == doctest::Approx(std::log2(3.0) / 2.0).epsilon(1e-9));
    CHECK(s.powers.p1 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.powers.p2 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tight relay on unit channels is I-1 with the minimal source power") {
    // Relay splits evenly; each source needs log2(1 + Pr/2) and the MAC twice that.
    for (double pr : {0.1, 0.2}) {
        const double per = 0.5 * pr;
        const NetSolution s = solve_scalar(2, 2, pr);
        CHECK(s.subcase.label == SubcaseLabel::I_1);
        CHECK(s.powers.pr == doctest::Approx(pr).epsilon(1e-9));
        CHECK(s.rates.r_tw == doctest::Approx(std::log2(1.0 + per)).epsilon(1e-9));
        CHECK(s.powers.p1 + s.powers.p2 == doctest::Approx((1 + per) * (1 + per) - 1.0).epsilon(1e-6));
        CHECK(s.powers.p1 >= per - 1e-7);
        CHECK(s.powers.p2 >= per - 1e-7);
    }
}

TEST_CASE("weak source 2 gives I-2 with the derived optimum") {
    // Source 2 at full 0.1 fixes the relay's side-1 level; the rest of the
    // relay serves node 2 and source 1 balances the MAC: R_tw = log2(3.19)/2.
    for (bool one_shot : {true, false}) {
        NetOptions opts;
        opts.allow_one_shot = one_shot;
        const NetSolution s = solve_scalar(10, 0.1, 2, opts);
        CHECK(s.subcase.label == SubcaseLabel::I_2);
        CHECK(s.subcase.j == Source::Two);
        CHECK(s.status == SolveStatus::Optimal);
        CHECK(s.route == (one_shot ? Route::OneShot : Route::Bisection));
        CHECK(s.rates.r_tw == doctest::Approx(0.5 * std::log2(3.19)).epsilon(1e-6));
        CHECK(s.powers.p1 == doctest::Approx(2.09).epsilon(1e-5));
        CHECK(s.powers.p2 == doctest::Approx(0.1).epsilon(1e-7));
        CHECK(s.powers.pr == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(s.relay.b1(0, 0).real() == doctest::Approx(0.1).epsilon(1e-5));
        if (!one_shot) {
            CHECK(s.bisection_iters <= bisection_bound(s.bracket_width, 1e-6));
            CHECK(s.exit_gap < 1e-6);
        }
    }
}

TEST_CASE("no relay power gives the zero solution") {
    const NetSolution s = solve_scalar(1, 1, 0);
    CHECK(s.rates.r_tw == 0.0);
    CHECK(s.powers.total() == 0.0);
    CHECK(s.status == SolveStatus::Optimal);
}

TEST_CASE("a silent source caps the exchange at the one-way bottleneck") {
    const NetSolution s = solve_scalar(0, 1, 1);
    CHECK(s.rates.r_tw == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(s.powers.p1 == 0.0);
    CHECK(s.powers.total() == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("case split follows the initial allocation") {
    for (const Instance& in : corpus(11, 20)) {
        const InitialAlloc init = initial_allocation(in.ch, in.limits);
        const NetSolution s = network_optimize(in.ch, in.limits);
        const bool case_one = s.subcase.label == SubcaseLabel::I_1 || s.subcase.label == SubcaseLabel::I_2;
        CHECK(case_one == (classify(init) == Case::I));
        CHECK(case_one == (init.r_ma0 >= init.rhat_sum0 - 1e-9));
    }
}

TEST_CASE("outputs respect budgets and the initial upper bound") {
    for (const Instance& in : corpus(21, 40)) {
        const NetSolution s = network_optimize(in.ch, in.limits);
        CAPTURE(subcase_name(s.subcase.label));
        CHECK(s.status == SolveStatus::Optimal);
        CHECK(s.powers.p1 <= in.limits.p1max * (1 + 1e-9) + 1e-12);
        CHECK(s.powers.p2 <= in.limits.p2max * (1 + 1e-9) + 1e-12);
        CHECK(s.powers.pr <= in.limits.prmax * (1 + 1e-9) + 1e-12);
        CHECK(s.rates.r_tw <= 0.5 * std::min(s.init.r_ma0, s.init.rhat_sum0) + 1e-9);
        CHECK(s.rates.r_tw == doctest::Approx(two_way_rate(s.rates.r_ma, s.rates.rhat_r1, s.rates.rhat_r2,
                                                           s.rates.rbar_1r, s.rates.rbar_2r)));
    }
}

TEST_CASE("pipeline subcases use the full relay and order the source levels") {
    int seen = 0;
    for (const Instance& in : corpus(31, 60)) {
        const NetSolution s = network_optimize(in.ch, in.limits);
        if (!is_pipeline(s.subcase.label)) continue;
        ++seen;
        CAPTURE(subcase_name(s.subcase.label));
        CHECK(std::abs(s.powers.pr - in.limits.prmax) <= 1e-6);
        CHECK(s.levels.inv_mu(s.subcase.j) < s.levels.inv_mu(s.subcase.i));
    }
    CHECK(seen > 5);
}

TEST_CASE("bisection halves the bracket every iteration and exits within eps") {
    NetOptions opts;
    opts.allow_one_shot = false;
    int runs = 0;
    for (const Instance& in : corpus(41, 40)) {
        const NetSolution s = network_optimize(in.ch, in.limits, opts);
        if (s.route != Route::Bisection) continue;
        ++runs;
        CHECK(s.status == SolveStatus::Optimal);
        CHECK(s.exit_gap < 1e-6);
        REQUIRE(static_cast<int>(s.trace.size()) == s.bisection_iters);
        for (std::size_t k = 1; k < s.trace.size(); ++k) {
            const double w0 = s.trace[k - 1].r_max - s.trace[k - 1].r_min;
            const double w1 = s.trace[k].r_max - s.trace[k].r_min;
            CHECK(w1 == doctest::Approx(k == 1 ? w0 : 0.5 * w0).epsilon(1e-9));
        }
    }
    CHECK(runs > 5);
}

TEST_CASE("one-shot and bisection routes agree") {
    NetOptions forced;
    forced.allow_one_shot = false;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const ChannelSet ch = test::random_channels(seed, 6, 4, 8);
        const PowerLimits lim{2.0, 2.5, 3.0};
        const NetSolution a = network_optimize(ch, lim);
        const NetSolution b = network_optimize(ch, lim, forced);
        CHECK(a.subcase.label == b.subcase.label);
        CHECK(a.rates.r_tw == doctest::Approx(b.rates.r_tw).epsilon(1e-6));
    }
}

TEST_CASE("identical sources only produce I-1 or II-1") {
    CounterRng rng(5);
    for (int t = 0; t < 40; ++t) {
        ChannelSpec spec;
        spec.seed = 700 + static_cast<std::uint64_t>(t);
        spec.n1 = spec.n2 = 1 + static_cast<int>(rng.next_u64() % 4);
        spec.nr = 1 + static_cast<int>(rng.next_u64() % 6);
        spec.identical_sources = true;
        const double p = 0.1 + 4.9 * rng.next_open01();
        const NetSolution s = network_optimize(generate_channels(spec), {p, p, 0.1 + 4.9 * rng.next_open01()});
        CHECK((s.subcase.label == SubcaseLabel::I_1 || s.subcase.label == SubcaseLabel::II_1));
    }
}

TEST_CASE("solves are deterministic") {
    const ChannelSet ch = test::random_channels(3, 6, 4, 8);
    const NetSolution a = network_optimize(ch, {2.0, 2.5, 3.0});
    const NetSolution b = network_optimize(ch, {2.0, 2.5, 3.0});
    CHECK(a.rates.r_tw == b.rates.r_tw);
    CHECK(a.powers.total() == b.powers.total());
    CHECK((a.d.d1 - b.d.d1).norm() == 0.0);
}

TEST_CASE("example-size solve is fast") {
    const ChannelSet ch = test::random_channels(0, 6, 4, 8);
    const auto t0 = std::chrono::steady_clock::now();
    const NetSolution s = network_optimize(ch, {2.0, 2.5, 3.0});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(s.status == SolveStatus::Optimal);
    CHECK(secs < 5.0);
}

TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(network_optimize(test::scalar_channels(1, 1, 1, 1), {-1.0, 1.0, 1.0}), InvalidInput);
    const ChannelSet ch = test::scalar_channels(1, 1, 1, 1);
    const InitialAlloc init = initial_allocation(ch, {1, 1, 1});
    CHECK_THROWS_AS(subcase_I2_pipeline(ch, {1, 1, 1}, init, {SubcaseLabel::I_2, Source::One, Source::One}, 1.0),
                    InvalidInput);
}
