// Acceptance suite: one PASS/FAIL line per criterion, exit status = number of failures.
// An optional argument names a file that receives a copy of the report.
#include "twr/harness.hpp"
#include "twr/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

using namespace twr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int g_failed = 0;
int g_evaluated = 0;
std::FILE* g_report = nullptr;  // optional copy of every printed line

void emit(const std::string& line) {
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    if (g_report) {
        std::fputs(line.c_str(), g_report);
        std::fflush(g_report);
    }
}

void report(int id, bool pass, const std::string& title, const std::string& detail) {
    ++g_evaluated;
    if (!pass) ++g_failed;
    char head[32];
    std::snprintf(head, sizeof head, "criterion %2d: %s  ", id, pass ? "PASS" : "FAIL");
    emit(head + title + "  [" + detail + "]\n");
}

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

GainVector draw_gains(CounterRng& rng, int max_modes, double log_lo, double log_hi) {
    const int r = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_modes));
    std::vector<double> g;
    for (int k = 0; k < r; ++k) g.push_back(std::exp(log_lo + (log_hi - log_lo) * rng.next_open01()));
    return GainVector::from_unsorted(g);
}

// Best two-mode split of `budget` for gains a >= b.
double two_mode_rate(double a, double b, double budget) {
    const double gap = 1.0 / b - 1.0 / a;
    const double pa = budget <= gap ? budget : 0.5 * (budget + gap);
    return std::log2(1.0 + a * pa) + std::log2(1.0 + b * (budget - pa));
}

// Grid over the strongest mode's power at `step`; the remainder is split exactly.
double grid_rate(const GainVector& g, double budget, double step) {
    if (g.rank() == 1) return std::log2(1.0 + g[0] * budget);
    const long n = static_cast<long>(std::floor(budget / step));
    double best = 0.0;
    for (long k = 0; k <= n + 1; ++k) {
        const double p = std::min(budget, static_cast<double>(k) * step);
        const double rest = budget - p;
        double r = std::log2(1.0 + g[0] * p);
        r += g.rank() == 2 ? std::log2(1.0 + g[1] * rest) : two_mode_rate(g[1], g[2], rest);
        best = std::max(best, r);
    }
    return best;
}

void criterion1() {
    const auto t0 = Clock::now();
    CounterRng rng(101);
    double worst_budget = 0.0, worst_kkt = 0.0, worst_grid = 0.0;
    int small = 0;
    for (int t = 0; t < 1000; ++t) {
        const GainVector g = draw_gains(rng, 16, -3.0, 2.0);
        const double budget = 10.0 * rng.next_open01();
        const LevelAlloc a = waterfill(g, budget);
        double sum = 0.0;
        for (int k = 0; k < g.rank(); ++k) {
            const double p = a.powers[static_cast<std::size_t>(k)];
            sum += p;
            const double want = std::max(0.0, a.inv_level - 1.0 / g[k]);
            worst_kkt = std::max(worst_kkt, std::abs(p - want) / std::max(1.0, a.inv_level));
        }
        worst_budget = std::max(worst_budget, std::abs(sum - budget) / std::max(1.0, budget));
        if (g.rank() <= 3) {
            ++small;
            const double grid = grid_rate(g, budget, 1e-4);
            worst_grid = std::max(worst_grid, std::max(0.0, grid - a.rate) + std::max(0.0, a.rate - grid));
        }
    }
    const double secs = seconds_since(t0);
    const bool pass = worst_budget <= 1e-9 && worst_kkt <= 1e-12 && worst_grid <= 1e-6 && secs < 10.0;
    report(1, pass, "waterfilling correctness",
           "budget " + fmt("%.1e", worst_budget) + ", KKT form " + fmt("%.1e", worst_kkt) + ", grid gap " +
               fmt("%.1e", worst_grid) + " bits on " + std::to_string(small) + " small instances, " +
               fmt("%.2f s", secs));
}

void criterion2() {
    CounterRng rng(202);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const GainVector g = draw_gains(rng, 16, -4.0, 4.0);
        const double rate = 30.0 * rng.next_open01();
        worst = std::max(worst, std::abs(rate_at_level(g, level_for_rate(g, rate)) - rate));
    }
    report(2, worst <= 1e-9, "inverse-level round trip", "worst " + fmt("%.1e", worst) + " bits over 1000 cases");
}

void criterion3() {
    CounterRng rng(303);
    double worst_scalar = 0.0;
    for (int t = 0; t < 50; ++t) {
        ChannelSet ch;
        const double h1 = rng.next_normal(), h2 = rng.next_normal();
        ch.h1r = CMatrix::Constant(1, 1, h1);
        ch.h2r = CMatrix::Constant(1, 1, h2);
        ch.hr1 = ch.hr2 = CMatrix::Constant(1, 1, 1.0);
        const double p1 = 5.0 * rng.next_open01(), p2 = 5.0 * rng.next_open01();
        const double want = std::log2(1.0 + h1 * h1 * p1 + h2 * h2 * p2);
        worst_scalar = std::max(worst_scalar, std::abs(mac_capacity(ch, p1, p2).objective_value - want));
        ch.h1r(0, 0) = ch.h2r(0, 0) = 1.0;
        worst_scalar =
            std::max(worst_scalar, std::abs(mac_capacity(ch, p1, p2).objective_value - std::log2(1.0 + p1 + p2)));
    }
    double worst_2x2 = 0.0;
    for (int t = 0; t < 50; ++t) {
        ChannelSpec spec;
        spec.n1 = spec.n2 = spec.nr = 2;
        spec.seed = 3000 + static_cast<std::uint64_t>(t);
        const ChannelSet ch = generate_channels(spec);
        LogDetProgram prog;
        prog.objective = Objective::MaxMacSum;
        prog.p1max = 0.1 + 4.9 * rng.next_open01();
        prog.p2max = 0.1 + 4.9 * rng.next_open01();
        const CvxSolution iw = mac_capacity(ch, prog.p1max, prog.p2max);
        const CvxSolution gen = solve(ch, prog);
        const bool ok = iw.status == SolveStatus::Optimal && gen.status == SolveStatus::Optimal;
        worst_2x2 = std::max(worst_2x2, ok ? std::abs(iw.objective_value - gen.objective_value) : 1e300);
    }
    report(3, worst_scalar <= 1e-10 && worst_2x2 <= 1e-4, "MAC capacity",
           "scalar " + fmt("%.1e", worst_scalar) + ", 2x2 iterative vs generic " + fmt("%.1e", worst_2x2) + " bits");
}

void criterion4() {
    ChannelSet ch;
    ch.h1r = ch.h2r = ch.hr1 = ch.hr2 = CMatrix::Constant(1, 1, 1.0);
    const PowerLimits lim{1, 1, 3};
    const NetSolution s = network_optimize(ch, lim);
    const OracleResult o = scalar_oracle(ch, lim, 300);
    const double relay = 2.0 * (std::sqrt(3.0) - 1.0), rate = 0.5 * std::log2(3.0);
    const bool pass = s.subcase.label == SubcaseLabel::II_1 && std::abs(s.powers.pr - relay) <= 1e-6 &&
                      std::abs(s.rates.r_tw - rate) <= 1e-6 && std::abs(o.q1 + o.q2 - relay) <= 1e-6 &&
                      std::abs(o.r_tw - rate) <= 1e-6;
    report(4, pass, "II-1 closed form",
           std::string(subcase_name(s.subcase.label)) + ", relay " + fmt("%.6f", s.powers.pr) + ", R_tw " +
               fmt("%.6f", s.rates.r_tw) + ", oracle relay " + fmt("%.6f", o.q1 + o.q2));
}

struct CorpusEntry {
    ChannelSet ch;
    PowerLimits lim;
    NetSolution sol;
    AuditReport audit;
};

// Three regimes of 200: i.i.d., reciprocal, weak source 2 (v2 = 0.2).
std::vector<CorpusEntry> build_corpus(double& secs) {
    const auto t0 = Clock::now();
    std::vector<CorpusEntry> out;
    for (int regime = 0; regime < 3; ++regime) {
        CounterRng rng(1000 + static_cast<std::uint64_t>(regime));
        for (int t = 0; t < 200; ++t) {
            ChannelSpec spec;
            spec.seed = static_cast<std::uint64_t>(regime) * 100000 + static_cast<std::uint64_t>(t);
            spec.nr = 1 + static_cast<int>(rng.next_open01() * 6);
            spec.n1 = 1 + static_cast<int>(rng.next_open01() * 4);
            spec.n2 = 1 + static_cast<int>(rng.next_open01() * 4);
            spec.reciprocal = regime == 1;
            if (regime == 2) spec.v2 = 0.2;
            CorpusEntry e;
            e.ch = generate_channels(spec);
            e.lim = {0.1 + 4.9 * rng.next_open01(), 0.1 + 4.9 * rng.next_open01(), 0.1 + 4.9 * rng.next_open01()};
            e.sol = network_optimize(e.ch, e.lim);
            e.audit = check_necessary(e.ch, e.lim, e.sol);
            out.push_back(std::move(e));
        }
    }
    secs = seconds_since(t0);
    return out;
}

bool is_pipeline(SubcaseLabel s) { return s == SubcaseLabel::I_2 || s == SubcaseLabel::II_4; }

void criteria5to8(double& corpus_secs) {
    std::vector<CorpusEntry> corpus = build_corpus(corpus_secs);

    int fail5 = 0;
    double worst13a = 0.0, worst13b = 0.0;
    for (const CorpusEntry& e : corpus) {
        const AuditReport& a = e.audit;
        const bool ok = e.sol.status == SolveStatus::Optimal && a.cond_13a_pair1.pass && a.cond_13a_pair2.pass &&
                        a.cond_13b.pass;
        if (!ok) ++fail5;
        worst13a = std::min({worst13a, a.cond_13a_pair1.residual, a.cond_13a_pair2.residual});
        worst13b = std::max(worst13b, a.cond_13b.residual);
    }
    report(5, fail5 == 0, "necessary-condition audit",
           std::to_string(fail5) + " failures in " + std::to_string(corpus.size()) + ", lowest level slack " +
               fmt("%.1e", worst13a) + ", largest rate balance gap " + fmt("%.1e", worst13b));

    int n6 = 0, fail6 = 0;
    double worst6 = 0.0;
    for (const CorpusEntry& e : corpus) {
        if (e.sol.subcase.label != SubcaseLabel::I_1) continue;
        ++n6;
        worst6 = std::max(worst6, e.audit.theorem1.residual);
        if (!(e.audit.theorem1.applicable && e.audit.theorem1.residual <= 1e-5)) ++fail6;
    }
    report(6, n6 > 0 && fail6 == 0, "I-1 level predicate",
           std::to_string(n6) + " I-1 outputs, worst " + fmt("%.1e", worst6));

    int n7 = 0, fail7 = 0;
    for (const CorpusEntry& e : corpus) {
        if (!is_pipeline(e.sol.subcase.label)) continue;
        ++n7;
        const bool full = std::abs(e.sol.powers.pr - e.lim.prmax) <= 1e-6;
        const bool order = e.sol.levels.inv_mu(e.sol.subcase.j) < e.sol.levels.inv_mu(e.sol.subcase.i);
        if (!full || !order) ++fail7;
    }
    report(7, n7 > 0 && fail7 == 0, "I-2/II-4 full relay power and level order",
           std::to_string(fail7) + " failures in " + std::to_string(n7) + " outputs");

    int n8 = 0, over = 0, gap_fail = 0, worst_excess = 0;
    for (const CorpusEntry& e : corpus) {
        if (!is_pipeline(e.sol.subcase.label)) continue;
        // The one-shot route skips the bisection; force it to measure the bound.
        NetOptions forced;
        forced.allow_one_shot = false;
        const NetSolution s = e.sol.route == Route::Bisection ? e.sol : network_optimize(e.ch, e.lim, forced);
        if (s.route != Route::Bisection) continue;
        ++n8;
        const int bound = bisection_bound(s.bracket_width, 1e-6);
        if (s.bisection_iters > bound) {
            ++over;
            worst_excess = std::max(worst_excess, s.bisection_iters - bound);
        }
        if (!(s.exit_gap < 1e-6)) ++gap_fail;
    }
    report(8, n8 > 0 && over == 0 && gap_fail == 0, "bisection iteration bound and exit gap",
           std::to_string(n8) + " bisection solves, " + std::to_string(over) + " over the bound (worst +" +
               std::to_string(worst_excess) + "), " + std::to_string(gap_fail) + " exit gaps >= eps");
}

void criterion9() {
    const auto t0 = Clock::now();
    RunConfig cfg;
    cfg.seed = 77;
    cfg.trials = 100;
    cfg.random_limits = true;
    const auto rows = run_oracle_suite(cfg, static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
    int pass = 0;
    double worst_rate = 0.0, worst_power = 0.0;
    for (const OracleRow& r : rows) {
        pass += r.pass ? 1 : 0;
        worst_rate = std::max(worst_rate, std::abs(r.rtw_alg - r.rtw_oracle));
        worst_power = std::max(worst_power, std::abs(r.d_power));
    }
    const double secs = seconds_since(t0);
    report(9, pass == 100 && secs < 300.0, "scalar oracle equivalence",
           std::to_string(pass) + "/100, worst rate gap " + fmt("%.1e", worst_rate) + " bits, worst power " +
               fmt("%.1e", worst_power) + " relative, " + fmt("%.1f s", secs));
}

void criterion10() {
    CounterRng rng(99);
    int ok = 0;
    for (int t = 0; t < 200; ++t) {
        ChannelSpec spec;
        spec.seed = 9000 + static_cast<std::uint64_t>(t);
        spec.n1 = spec.n2 = 1 + static_cast<int>(rng.next_open01() * 4);
        spec.nr = 1 + static_cast<int>(rng.next_open01() * 6);
        spec.identical_sources = true;
        const double p = 0.1 + 4.9 * rng.next_open01();
        const NetSolution s = network_optimize(generate_channels(spec), {p, p, 0.1 + 4.9 * rng.next_open01()});
        if (s.subcase.label == SubcaseLabel::I_1 || s.subcase.label == SubcaseLabel::II_1) ++ok;
    }
    report(10, ok == 200, "symmetric networks stay in I-1/II-1", std::to_string(ok) + "/200");
}

int asymmetric_count(const SweepCell& c) {
    return c.counts[static_cast<std::size_t>(SubcaseLabel::I_2)] +
           c.counts[static_cast<std::size_t>(SubcaseLabel::II_4)];
}

// Cells ordered from one extreme through the symmetric centre to the other.
bool trend_holds(const std::vector<SweepCell>& cells, std::string& detail) {
    std::vector<int> n;
    for (const SweepCell& c : cells) n.push_back(asymmetric_count(c));
    const std::size_t mid = n.size() / 2;
    bool ok = true;
    for (std::size_t k = 0; k < mid; ++k) ok = ok && n[k] >= n[k + 1];
    for (std::size_t k = mid; k + 1 < n.size(); ++k) ok = ok && n[k] <= n[k + 1];
    ok = ok && n.front() > n[mid] && n.back() > n[mid];
    for (std::size_t k = 0; k < n.size(); ++k) detail += (k ? " " : "") + std::to_string(n[k]);
    return ok;
}

void criterion11() {
    const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    RunConfig base;
    base.n1 = base.n2 = 4;
    base.nr = 8;
    base.trials = 200;
    base.zip = true;

    RunConfig power = base;
    power.seed = 2024;
    power.prmax = 2.0;
    power.axes = {{AxisField::P1max, {1.9, 1.5, 1.0, 0.5, 0.1}}, {AxisField::P2max, {0.1, 0.5, 1.0, 1.5, 1.9}}};
    RunConfig variance = base;
    variance.seed = 2025;
    variance.p1max = variance.p2max = 1.0;
    variance.prmax = 2.0;
    variance.axes = {{AxisField::V1, {1.9, 1.5, 1.0, 0.5, 0.1}}, {AxisField::V2, {0.1, 0.5, 1.0, 1.5, 1.9}}};

    std::string dp = "power I-2+II-4: ", dv = "variance I-2+II-4: ";
    const bool p_ok = trend_holds(run_sweep(power, jobs), dp);
    const bool v_ok = trend_holds(run_sweep(variance, jobs), dv);
    report(11, p_ok && v_ok, "asymmetry trend", dp + "; " + dv);
}

void criterion12(double corpus_secs) {
    ChannelSpec spec;
    spec.n1 = 6;
    spec.n2 = 4;
    spec.nr = 8;
    spec.seed = trial_seed(1, 0);
    const ChannelSet ch = generate_channels(spec);
    double worst = 0.0;
    for (bool one_shot : {true, false}) {
        NetOptions opts;
        opts.allow_one_shot = one_shot;
        const auto t0 = Clock::now();
        (void)network_optimize(ch, {2.0, 2.5, 3.0}, opts);
        worst = std::max(worst, seconds_since(t0));
    }
    report(12, worst < 5.0 && corpus_secs < 900.0, "desk-scale runtime",
           "Example-1 solve " + fmt("%.3f s", worst) + ", 600-instance corpus " + fmt("%.1f s", corpus_secs));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1 && !(g_report = std::fopen(argv[1], "w"))) {
        std::fprintf(stderr, "cannot write %s\n", argv[1]);
        return 1;
    }
    double corpus_secs = 0.0;
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criteria5to8(corpus_secs);
    criterion9();
    criterion10();
    criterion11();
    criterion12(corpus_secs);
    emit("acceptance: " + std::to_string(g_evaluated) + " criteria evaluated, " +
         std::to_string(g_evaluated - g_failed) + " passed, " + std::to_string(g_failed) + " failed\n");
    if (g_report) std::fclose(g_report);
    return g_failed;
}
