#include "doctest.h"

#include "twr/harness.hpp"

#include <numeric>
#include <sstream>

using namespace twr;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string sweep_text(const RunConfig& cfg, int jobs) {
    std::ostringstream out;
    write_sweep_csv(out, cfg, run_sweep(cfg, jobs));
    return out.str();
}

const char* kSweep = R"(
# power asymmetry at a fixed sum
[system]
n1 = 2
n2 = 2
nr = 3
[limits]
prmax = 2
[run]
seed = 9
trials = 12
[sweep]
mode = zip
p1max = 1.8, 1.0, 0.2
p2max = 0.2, 1.0, 1.8
)";

}  // namespace

TEST_CASE("config parses sections, comments and lists") {
    const RunConfig c = parse(R"(
; leading comment
[System]
n1 = 6
n2 = 4
nr = 8
reciprocal = yes
[limits]
p1max = 2
p2max = 2.5
prmax = 3
[run]
seed = 17
eps = 1e-7
[sweep]
v1 = 0.5, 1, 2
)");
    CHECK(c.n1 == 6);
    CHECK(c.nr == 8);
    CHECK(c.reciprocal);
    CHECK(c.p2max == 2.5);
    CHECK(c.seed == 17);
    CHECK(c.eps == 1e-7);
    REQUIRE(c.axes.size() == 1);
    CHECK(c.axes[0].field == AxisField::V1);
    CHECK(c.axes[0].values == std::vector<double>{0.5, 1, 2});
    CHECK_FALSE(c.zip);
}

TEST_CASE("config errors are reported") {
    CHECK_THROWS_AS(parse("[system]\nn1 = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[system]\nn1 = two\n"), ConfigError);
    CHECK_THROWS_AS(parse("[system]\nbogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[nowhere]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("n1 = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("[limits]\np1max = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[system]\nn1 = 2\nn1 = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse("[run]\neps = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sweep]\nnr = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sweep]\nmode = zip\np1max = 1, 2\np2max = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sweep]\nmode = diagonal\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/twr.ini"), ConfigError);
}

TEST_CASE("trial seeds are shared across cells and distinct across trials") {
    RunConfig a, b;
    a.seed = b.seed = 5;
    b.p1max = 4.0;
    CHECK(a.channel_spec(3).seed == b.channel_spec(3).seed);
    CHECK(a.channel_spec(3).seed != a.channel_spec(4).seed);
}

TEST_CASE("sweep output does not depend on the worker count") {
    const RunConfig cfg = parse(kSweep);
    const std::string one = sweep_text(cfg, 1);
    CHECK(one == sweep_text(cfg, 4));
    CHECK(one == sweep_text(cfg, 1));
    CHECK(one.rfind("# twr-sweep v1\nP1max,P2max,count_I1,", 0) == 0);
}

TEST_CASE("sweep counts cover every trial") {
    const RunConfig cfg = parse(kSweep);
    const auto cells = run_sweep(cfg, 2);
    REQUIRE(cells.size() == 3);
    for (const SweepCell& c : cells) {
        CHECK(std::accumulate(c.counts.begin(), c.counts.end(), 0) == c.trials);
        CHECK(c.failures == 0);
        CHECK(c.mean_rtw > 0.0);
    }
}

TEST_CASE("grid mode crosses the axes with the first axis slowest") {
    RunConfig cfg = parse("[run]\ntrials = 2\n[sweep]\np1max = 1, 2\nprmax = 0.5, 1, 2\n");
    const auto cells = run_sweep(cfg);
    REQUIRE(cells.size() == 6);
    CHECK(cells[0].coords == std::vector<double>{1, 0.5});
    CHECK(cells[2].coords == std::vector<double>{1, 2});
    CHECK(cells[3].coords == std::vector<double>{2, 0.5});
}

TEST_CASE("symmetric cell has no asymmetric subcases") {
    const RunConfig cfg = parse(R"(
[system]
n1 = 2
n2 = 2
nr = 4
identical_sources = true
[run]
trials = 30
[sweep]
p1max = 1.5
p2max = 1.5
)");
    const auto cells = run_sweep(cfg, 3);
    REQUIRE(cells.size() == 1);
    const auto& n = cells[0].counts;
    CHECK(n[static_cast<int>(SubcaseLabel::I_2)] + n[static_cast<int>(SubcaseLabel::II_4)] == 0);
    CHECK(cells[0].failures == 0);
}

TEST_CASE("sweep without axes is rejected") {
    CHECK_THROWS_AS(run_sweep(RunConfig{}), ConfigError);
}

TEST_CASE("oracle suite") {
    RunConfig cfg;
    cfg.trials = 0;
    std::ostringstream empty;
    write_oracle_csv(empty, run_oracle_suite(cfg));
    CHECK(empty.str() == "# twr-oracle v1\ntrial,seed,Rtw_alg,Rtw_oracle,dP,pass\n");

    cfg.trials = 6;
    cfg.random_limits = true;
    cfg.oracle_steps = 100;
    const auto rows = run_oracle_suite(cfg, 3);
    REQUIRE(rows.size() == 6);
    for (const OracleRow& r : rows) {
        CHECK(r.pass);
        CHECK(r.seed == trial_seed(cfg.seed, r.trial));
    }

    cfg.n2 = 2;
    CHECK_THROWS_AS(run_oracle_suite(cfg), ConfigError);
}

TEST_CASE("single run writes a closed-form trace and summary") {
    RunConfig cfg;
    cfg.p1max = cfg.p2max = 1.0;
    cfg.prmax = 0.0;
    const SingleRun r = run_single(cfg);
    CHECK(r.solution.rates.r_tw == 0.0);
    std::ostringstream trace, summary;
    write_trace_csv(trace, r.solution);
    write_summary_csv(summary, r);
    CHECK(trace.str().rfind("# twr-trace v1\niter,R_obj,R_ma,R_bc_sum,R_tw,P1,P2,Pr\n", 0) == 0);
    CHECK(summary.str().find(",0,0,") != std::string::npos);
    CHECK(summary.str().find("pass") != std::string::npos);
}

TEST_CASE("parallel_for visits every index once") {
    std::vector<int> hits(100, 0);
    parallel_for(100, 7, [&](int k) { ++hits[static_cast<std::size_t>(k)]; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    parallel_for(0, 4, [&](int) { FAIL("no work expected"); });
}
