#include "twr/netopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace twr {

const char* subcase_name(SubcaseLabel s) {
    switch (s) {
        case SubcaseLabel::I_1: return "I-1";
        case SubcaseLabel::I_2: return "I-2";
        case SubcaseLabel::II_1: return "II-1";
        case SubcaseLabel::II_2: return "II-2";
        case SubcaseLabel::II_3: return "II-3";
        case SubcaseLabel::II_4: return "II-4";
    }
    return "?";
}

const char* route_name(Route r) {
    switch (r) {
        case Route::ClosedForm: return "closed-form";
        case Route::ConvexProgram: return "convex";
        case Route::OneShot: return "one-shot";
        case Route::Bisection: return "bisection";
    }
    return "?";
}

int bisection_bound(double width, double eps) {
    if (!(width > eps)) return 2;
    return static_cast<int>(std::ceil(std::log2(width / eps))) + 2;
}

double two_way_rate(double r_ma, double rhat_r1, double rhat_r2, double rbar_1r, double rbar_2r) {
    return 0.5 * std::min(r_ma, std::min(rhat_r1, rbar_2r) + std::min(rhat_r2, rbar_1r));
}

NetSolution assemble(const ChannelSet& ch, const CovPair& d, double inv_lambda1, double inv_lambda2) {
    NetSolution s;
    s.d = d;
    const auto [g1, svd1] = bc_gains(ch, Source::One);
    const auto [g2, svd2] = bc_gains(ch, Source::Two);
    s.relay.inv_lambda1 = inv_lambda1;
    s.relay.inv_lambda2 = inv_lambda2;
    s.relay.b1 = relay_covariance(svd1, g1, inv_lambda1);
    s.relay.b2 = relay_covariance(svd2, g2, inv_lambda2);
    s.relay.relay_power = power_at_level(g1, inv_lambda1) + power_at_level(g2, inv_lambda2);

    s.rates.r_ma = mac_rate(ch, d);
    s.rates.rbar_1r = uplink_rate(ch, d.d1, Source::One);
    s.rates.rbar_2r = uplink_rate(ch, d.d2, Source::Two);
    s.rates.rhat_r1 = rate_at_level(g1, inv_lambda1);
    s.rates.rhat_r2 = rate_at_level(g2, inv_lambda2);
    s.rates.r_tw = two_way_rate(s.rates.r_ma, s.rates.rhat_r1, s.rates.rhat_r2, s.rates.rbar_1r, s.rates.rbar_2r);

    DownlinkGains g{g1, g2, GainVector::concat(g1, g2)};
    s.levels = relative_levels(ch, g, d);
    s.powers = {d.trace(Source::One), d.trace(Source::Two), s.relay.relay_power};
    return s;
}

InitialAlloc initial_allocation(const ChannelSet& ch, const PowerLimits& limits) {
    if (!(limits.p1max >= 0.0) || !(limits.p2max >= 0.0) || !(limits.prmax >= 0.0) || !std::isfinite(limits.p1max) ||
        !std::isfinite(limits.p2max) || !std::isfinite(limits.prmax)) {
        throw InvalidInput("power limits must be finite and >= 0");
    }
    ch.validate();
    InitialAlloc init;
    const CvxSolution mac = mac_capacity(ch, limits.p1max, limits.p2max);
    init.d0 = mac.d;
    init.r_ma0 = mac_rate(ch, init.d0);
    const DownlinkGains g = DownlinkGains::of(ch);
    const LevelAlloc relay = waterfill(g.both, limits.prmax);
    init.inv_lambda0 = relay.inv_level;
    init.rhat_sum0 = rate_at_level(g.alpha1, relay.inv_level) + rate_at_level(g.alpha2, relay.inv_level);
    init.levels0 = relative_levels(ch, g, init.d0);
    return init;
}

Case classify(const InitialAlloc& init) {
    return init.r_ma0 >= init.rhat_sum0 - 1e-9 ? Case::I : Case::II;
}

namespace {

constexpr double kAuditLevelSlack = 1e-6;

struct Ctx {
    const ChannelSet& ch;
    PowerLimits lim;
    NetOptions opts;
    DownlinkGains g;

    Ctx(const ChannelSet& c, const PowerLimits& l, const NetOptions& o) : ch(c), lim(l), opts(o), g(DownlinkGains::of(c)) {}

    double rhat(Source s, double inv_level) const { return rate_at_level(g.of(s), inv_level); }
    CMatrix zeros(Source s) const { return CMatrix::Zero(ch.n(s), ch.n(s)); }
};

CovPair make_pair(Source i, const CMatrix& di, const CMatrix& dj) {
    CovPair d;
    d[i] = di;
    d[other(i)] = dj;
    return d;
}

NetSolution assemble_ij(const Ctx& c, const CovPair& d, Source i, double inv_i, double inv_j) {
    return i == Source::One ? assemble(c.ch, d, inv_i, inv_j) : assemble(c.ch, d, inv_j, inv_i);
}

// Relay split with side i pinned at inv_i and the remainder waterfilled on
// side j. When side i alone needs more than the budget it takes everything.
struct Split {
    double inv_i = 0.0;
    double inv_j = 0.0;
    bool capped = false;
};

Split split_relay(const Ctx& c, Source i, double inv_i) {
    const Source j = other(i);
    const double pi = power_at_level(c.g.of(i), inv_i);
    if (pi > c.lim.prmax) {
        return {waterfill(c.g.of(i), c.lim.prmax).inv_level, waterfill(c.g.of(j), 0.0).inv_level, true};
    }
    return {inv_i, waterfill(c.g.of(j), c.lim.prmax - pi).inv_level, false};
}

// Water-level form of the necessary conditions on an assembled solution.
bool passes_necessary(const NetSolution& s, double eps) {
    const double a1 = s.levels.inv_mu2 - s.relay.inv_lambda1;
    const double a2 = s.levels.inv_mu1 - s.relay.inv_lambda2;
    const double rbc = std::min(s.rates.rhat_r1, s.rates.rbar_2r) + std::min(s.rates.rhat_r2, s.rates.rbar_1r);
    return a1 >= -kAuditLevelSlack && a2 >= -kAuditLevelSlack &&
           std::abs(s.rates.r_ma - rbc) <= std::max(eps, 1e-6);
}

LogDetProgram program(const Ctx& c, Objective obj, std::vector<RateConstraint> rows) {
    LogDetProgram p;
    p.objective = obj;
    p.constraints = std::move(rows);
    p.p1max = c.lim.p1max;
    p.p2max = c.lim.p2max;
    return p;
}

// Minimum trace of D_i with D_j held fixed, subject to a MAC-rate floor and
// an uplink floor for i.
std::optional<CMatrix> min_trace_given(const Ctx& c, Source i, const CMatrix& dj, double r_ma_floor,
                                       double rbar_i_floor) {
    const Source j = other(i);
    const double budget = c.lim.source(i);
    const double rbar_j = uplink_rate(c.ch, dj, j);
    auto fits = [&](const CMatrix& di) {
        return di.trace().real() <= budget + 1e-9 &&
               mac_rate(c.ch, make_pair(i, di, dj)) >= r_ma_floor - 1e-10 &&
               uplink_rate(c.ch, di, i) >= rbar_i_floor - 1e-10;
    };
    try {
        const CMatrix a = min_power_for_rate(c.ch, i, dj, std::max(0.0, r_ma_floor - rbar_j));
        if (fits(a)) return a;
        const CMatrix b = min_power_for_rate(c.ch, i, c.zeros(i), std::max(0.0, rbar_i_floor));
        if (fits(b)) return b;
    } catch (const UnachievableRate&) {
        return std::nullopt;
    }
    LogDetProgram p = program(c, Objective::MinTotalTrace,
                              {{RateKind::MacSum, Sense::AtLeast, r_ma_floor},
                               {uplink_kind(i), Sense::AtLeast, std::max(0.0, rbar_i_floor)}});
    if (j == Source::One) {
        p.fixed_d1 = dj;
    } else {
        p.fixed_d2 = dj;
    }
    const CvxSolution s = solve(c.ch, p, c.opts.solver_tol);
    if (s.status != SolveStatus::Optimal) return std::nullopt;
    return s.d[i];
}

// Source j alone at full power, i best-responding to it.
CovPair j_first(const Ctx& c, Source i) {
    const Source j = other(i);
    const CMatrix dj = best_response(c.ch, j, c.zeros(i), c.lim.source(j));
    const CMatrix di = best_response(c.ch, i, dj, c.lim.source(i));
    return make_pair(i, di, dj);
}

// Largest MAC rate subject to R_jr >= r.
std::optional<CovPair> mac_given_uplink(const Ctx& c, const InitialAlloc& init, Source i, double r, double r_lo,
                                        double r_hi) {
    const Source j = other(i);
    if (r <= r_lo) return init.d0;
    if (r >= r_hi - 1e-12) return j_first(c, i);
    const CvxSolution s = solve(c.ch, program(c, Objective::MaxMacSum, {{uplink_kind(j), Sense::AtLeast, r}}),
                                c.opts.solver_tol);
    if (s.status != SolveStatus::Optimal) return std::nullopt;
    return s.d;
}

struct OneShot {
    std::optional<NetSolution> solution;
    bool tried = false;
    bool fallback = false;
};

// Step 2: D_j^l, the levels of (18), the gate, then (20).
OneShot try_one_shot(const Ctx& c, const InitialAlloc& init, Source i) {
    const Source j = other(i);
    OneShot out;
    const double r_lo = uplink_rate(c.ch, init.d0[j], j);
    const CovPair full = j_first(c, i);
    const double r_hi = uplink_rate(c.ch, full[j], j);

    auto holds = [&](const CovPair& d) {
        const WaterLevels w = relative_levels(c.ch, c.g, d);
        return w.inv_mu(j) <= w.inv_mu_ma + 1e-12;
    };
    if (!holds(init.d0)) return out;

    double best_r = r_lo;
    CovPair best_d = init.d0;
    if (holds(full)) {
        best_r = r_hi;
        best_d = full;
    } else {
        double lo = r_lo, hi = r_hi;
        for (int k = 0; k < 60 && hi - lo > 1e-9 * std::max(1.0, hi); ++k) {
            const double mid = 0.5 * (lo + hi);
            const auto d = mac_given_uplink(c, init, i, mid, r_lo, r_hi);
            if (d && holds(*d)) {
                lo = mid;
                best_r = mid;
                best_d = *d;
            } else {
                hi = mid;
            }
        }
    }

    const double inv_i = relative_levels(c.ch, c.g, best_d).inv_mu(j);
    if (power_at_level(c.g.of(i), inv_i) > c.lim.prmax) return out;
    const Split sp = split_relay(c, i, inv_i);
    const double rhat_i = c.rhat(i, sp.inv_i);
    const double rhat_j = c.rhat(j, sp.inv_j);
    if (rhat_i + rhat_j > mac_rate(c.ch, best_d) + 1e-12) return out;

    out.tried = true;
    std::optional<CovPair> d;
    if (best_r >= r_hi - 1e-12) {
        if (auto di = min_trace_given(c, i, best_d[j], rhat_i + rhat_j, rhat_j)) d = make_pair(i, *di, best_d[j]);
    } else {
        const CvxSolution s = solve(c.ch,
                                    program(c, Objective::MinTotalTrace,
                                            {{RateKind::MacSum, Sense::AtLeast, rhat_i + rhat_j},
                                             {uplink_kind(i), Sense::AtLeast, rhat_j},
                                             {uplink_kind(j), Sense::AtLeast, rhat_i}}),
                                    c.opts.solver_tol);
        if (s.status == SolveStatus::Optimal) d = s.d;
    }
    if (d) {
        NetSolution sol = assemble_ij(c, *d, i, sp.inv_i, sp.inv_j);
        if (passes_necessary(sol, c.opts.eps)) {
            out.solution = std::move(sol);
            return out;
        }
    }
    out.fallback = true;
    return out;
}

struct Step22 {
    CovPair d;
    double rbar_j = 0.0;
    bool ok = false;
};

// Problem (22) at R_obj. Among maximisers, D_i is the least-power one that
// keeps R_ma = R_obj.
Step22 solve22(const Ctx& c, const InitialAlloc& init, Source i, double r_obj) {
    const Source j = other(i);
    Step22 out;
    if (r_obj >= init.r_ma0 - 1e-12) {
        out.d = init.d0;
        out.rbar_j = uplink_rate(c.ch, init.d0[j], j);
        out.ok = true;
        return out;
    }
    CMatrix dj;
    const CovPair full = j_first(c, i);
    if (mac_rate(c.ch, full) >= r_obj) {
        dj = full[j];
    } else {
        const CvxSolution s = solve(
            c.ch, program(c, max_uplink(j), {{RateKind::MacSum, Sense::AtLeast, r_obj}}), c.opts.solver_tol);
        if (s.status != SolveStatus::Optimal) return out;
        dj = s.d[j];
        out.d = s.d;
    }
    out.rbar_j = uplink_rate(c.ch, dj, j);
    CMatrix di = min_power_for_rate(c.ch, i, dj, std::max(0.0, r_obj - out.rbar_j));
    if (di.trace().real() > c.lim.source(i) + 1e-9) {
        if (out.d.d1.size() == 0) return out;
        di = out.d[i];
    }
    out.d = make_pair(i, di, dj);
    out.ok = true;
    return out;
}

TraceRow trace_row(const Ctx& c, int iter, double r_obj, double r_min, double r_max, const CovPair& d, Source i,
                   const Split& sp) {
    const Source j = other(i);
    TraceRow t;
    t.iter = iter;
    t.r_obj = r_obj;
    t.r_min = r_min;
    t.r_max = r_max;
    t.r_ma = mac_rate(c.ch, d);
    const double rhat_i = c.rhat(i, sp.inv_i);
    const double rhat_j = c.rhat(j, sp.inv_j);
    t.r_bc_sum = rhat_i + rhat_j;
    const double rbar_i = uplink_rate(c.ch, d[i], i);
    const double rbar_j = uplink_rate(c.ch, d[j], j);
    t.r_tw = 0.5 * std::min(t.r_ma, std::min(rhat_i, rbar_j) + std::min(rhat_j, rbar_i));
    t.p1 = d.trace(Source::One);
    t.p2 = d.trace(Source::Two);
    t.pr = power_at_level(c.g.of(i), sp.inv_i) + power_at_level(c.g.of(j), sp.inv_j);
    return t;
}

TraceRow summary_row(const NetSolution& s) {
    TraceRow t;
    t.r_obj = s.rates.r_tw * 2.0;
    t.r_max = t.r_obj;
    t.r_min = t.r_obj;
    t.r_ma = s.rates.r_ma;
    t.r_bc_sum = s.rates.bc_sum();
    t.r_tw = s.rates.r_tw;
    t.p1 = s.powers.p1;
    t.p2 = s.powers.p2;
    t.pr = s.powers.pr;
    return t;
}

struct GateOutcome {
    bool solvable = false;  // (16) has a feasible point
    double shortfall = 0.0;
    double phase1_slack = 0.0;
};

// Problem (16) for the ordering (i, j).
GateOutcome gate16(const Ctx& c, const InitialAlloc& init, Source i) {
    const Source j = other(i);
    const double rhat_j = c.rhat(j, init.inv_lambda0);
    const double rhat_i = c.rhat(i, init.inv_lambda0);
    const CvxSolution s = solve(c.ch,
                                program(c, max_uplink(j),
                                        {{uplink_kind(i), Sense::AtLeast, rhat_j},
                                         {RateKind::MacSum, Sense::AtLeast, init.rhat_sum0}}),
                                c.opts.solver_tol);
    GateOutcome g;
    g.phase1_slack = s.phase1_slack;
    if (s.status == SolveStatus::Infeasible) return g;
    g.solvable = true;
    g.shortfall = rhat_i - s.objective_value;
    return g;
}

}  // namespace

NetSolution subcase_I2_pipeline(const ChannelSet& ch, const PowerLimits& limits, const InitialAlloc& init,
                                Subcase subcase, double r_max_start, const NetOptions& opts) {
    const Ctx c(ch, limits, opts);
    const Source i = subcase.i;
    const Source j = subcase.j;
    if (i == j) throw InvalidInput("index pair must be distinct");

    OneShot os = opts.allow_one_shot ? try_one_shot(c, init, i) : OneShot{};
    if (os.solution) {
        NetSolution s = std::move(*os.solution);
        s.subcase = subcase;
        s.route = Route::OneShot;
        s.one_shot_tried = true;
        s.trace.push_back(summary_row(s));
        return s;
    }

    // Steps 3-5.
    double r_min = 0.0;
    double r_max = r_max_start;
    double r_obj = r_max;
    const double margin = std::min(0.5 * opts.eps, 16.0 * opts.solver_tol * std::max(1.0, r_max_start));
    std::vector<TraceRow> trace;
    Step22 step;
    Split sp;
    bool converged = false;
    int iter = 0;
    double gap = std::numeric_limits<double>::infinity();
    while (iter < opts.max_iters) {
        ++iter;
        step = solve22(c, init, i, r_obj);
        if (!step.ok) break;
        sp = split_relay(c, i, level_for_rate(c.g.of(i), step.rbar_j));
        trace.push_back(trace_row(c, iter, r_obj, r_min, r_max, step.d, i, sp));
        const double diff = trace.back().r_bc_sum - trace.back().r_ma;
        gap = std::abs(diff);
        if (gap < opts.eps - margin) {
            converged = true;
            break;
        }
        if (diff < 0.0) {
            r_max = r_obj;
        } else {
            r_min = r_obj;
        }
        r_obj = 0.5 * (r_max + r_min);
    }

    NetSolution out;
    if (!step.ok) {
        out = assemble(ch, init.d0, init.inv_lambda0, init.inv_lambda0);
        out.status = SolveStatus::MaxIters;
        out.note = "problem (22) failed at R_obj=" + std::to_string(r_obj);
    } else {
        // Step 6.
        const double rhat_j = c.rhat(j, sp.inv_j);
        const double rhat_i = c.rhat(i, sp.inv_i);
        std::optional<CovPair> d;
        if (!sp.capped) {
            if (auto di = min_trace_given(c, i, step.d[j], r_obj, rhat_j)) d = make_pair(i, *di, step.d[j]);
        } else {
            const CvxSolution s = solve(ch,
                                        program(c, Objective::MinTotalTrace,
                                                {{RateKind::MacSum, Sense::AtLeast, r_obj},
                                                 {uplink_kind(i), Sense::AtLeast, rhat_j},
                                                 {uplink_kind(j), Sense::AtLeast, rhat_i}}),
                                        opts.solver_tol);
            if (s.status == SolveStatus::Optimal) d = s.d;
        }
        out = assemble_ij(c, d ? *d : step.d, i, sp.inv_i, sp.inv_j);
        if (!d) out.note = "final power minimisation failed; bisection covariances kept";
        out.status = converged ? SolveStatus::Optimal : SolveStatus::MaxIters;
        out.relay_capped = sp.capped;
    }
    out.subcase = subcase;
    out.route = Route::Bisection;
    out.trace = std::move(trace);
    out.bisection_iters = iter;
    out.bracket_width = r_max_start;
    out.exit_gap = gap;
    out.one_shot_tried = os.tried;
    out.one_shot_fallback = os.fallback;
    return out;
}

NetSolution solve_case_I(const ChannelSet& ch, const PowerLimits& limits, const InitialAlloc& init,
                         const NetOptions& opts) {
    const Ctx c(ch, limits, opts);
    constexpr double kGateTol = 1e-7;
    const GateOutcome g12 = gate16(c, init, Source::One);  // i = 1, j = 2
    const GateOutcome g21 = gate16(c, init, Source::Two);  // i = 2, j = 1
    const bool pass12 = g12.solvable && g12.shortfall <= kGateTol;
    const bool pass21 = g21.solvable && g21.shortfall <= kGateTol;

    if (pass12 || pass21) {
        const double r1 = c.rhat(Source::One, init.inv_lambda0);
        const double r2 = c.rhat(Source::Two, init.inv_lambda0);
        const CvxSolution s = solve(ch,
                                    program(c, Objective::MinTotalTrace,
                                            {{RateKind::MacSum, Sense::AtLeast, init.rhat_sum0},
                                             {RateKind::Uplink1, Sense::AtLeast, r2},
                                             {RateKind::Uplink2, Sense::AtLeast, r1}}),
                                    opts.solver_tol);
        if (s.status == SolveStatus::Optimal) {
            NetSolution out = assemble(ch, s.d, init.inv_lambda0, init.inv_lambda0);
            out.subcase = {SubcaseLabel::I_1, Source::One, Source::Two};
            out.route = Route::ConvexProgram;
            out.status = SolveStatus::Optimal;
            out.trace.push_back(summary_row(out));
            return out;
        }
    }

    // Subcase I-2: j is the ordering whose (16) is solvable but falls short.
    Source j;
    if (g12.solvable && g21.solvable) {
        j = g12.shortfall <= g21.shortfall ? Source::Two : Source::One;
    } else if (g12.solvable) {
        j = Source::Two;
    } else if (g21.solvable) {
        j = Source::One;
    } else {
        j = g12.phase1_slack >= g21.phase1_slack ? Source::Two : Source::One;
    }
    const Subcase sc{SubcaseLabel::I_2, other(j), j};
    return subcase_I2_pipeline(ch, limits, init, sc, init.rhat_sum0, opts);
}

Subcase classify_subcase_II(const ChannelSet& ch, const PowerLimits& limits, const InitialAlloc& init) {
    const WaterLevels& w = init.levels0;
    if (w.inv_mu_ma <= std::min(w.inv_mu1, w.inv_mu2)) return {SubcaseLabel::II_1, Source::One, Source::Two};
    const Source j = w.inv_mu1 <= w.inv_mu2 ? Source::One : Source::Two;
    const Source i = other(j);
    if (w.inv_mu(i) <= init.inv_lambda0) return {SubcaseLabel::II_2, i, j};

    // Conditions (26): two closed-form waterfill evaluations.
    const DownlinkGains g = DownlinkGains::of(ch);
    const double need = std::max(0.0, init.r_ma0 - uplink_rate(ch, init.d0[j], j));
    double level_j = 0.0;
    try {
        level_j = level_for_rate(g.of(j), need);
    } catch (const UnachievableRate&) {
        return {SubcaseLabel::II_4, i, j};
    }
    const double remainder = limits.prmax - power_at_level(g.of(i), w.inv_mu(j));
    if (power_at_level(g.of(j), level_j) <= remainder + 1e-12) return {SubcaseLabel::II_3, i, j};
    return {SubcaseLabel::II_4, i, j};
}

NetSolution solve_case_II(const ChannelSet& ch, const PowerLimits& limits, const InitialAlloc& init,
                          const NetOptions& opts) {
    const Subcase sc = classify_subcase_II(ch, limits, init);
    if (sc.label == SubcaseLabel::II_4) return subcase_I2_pipeline(ch, limits, init, sc, init.r_ma0, opts);

    NetSolution out;
    if (sc.label == SubcaseLabel::II_1) {
        out = assemble(ch, init.d0, init.levels0.inv_mu_ma, init.levels0.inv_mu_ma);
    } else {
        const DownlinkGains g = DownlinkGains::of(ch);
        const double need = std::max(0.0, init.r_ma0 - uplink_rate(ch, init.d0[sc.j], sc.j));
        const double inv_i = init.levels0.inv_mu(sc.j);
        const double inv_j = level_for_rate(g.of(sc.j), need);
        out = sc.i == Source::One ? assemble(ch, init.d0, inv_i, inv_j) : assemble(ch, init.d0, inv_j, inv_i);
    }
    out.subcase = sc;
    out.route = Route::ClosedForm;
    out.status = SolveStatus::Optimal;
    out.trace.push_back(summary_row(out));
    return out;
}

NetSolution network_optimize(const ChannelSet& ch, const PowerLimits& limits, const NetOptions& opts) {
    if (!(opts.eps > 0.0) || opts.max_iters < 1 || !(opts.solver_tol > 0.0)) {
        throw InvalidInput("eps, max_iters and solver_tol must be positive");
    }
    const InitialAlloc init = initial_allocation(ch, limits);
    NetSolution out = classify(init) == Case::I ? solve_case_I(ch, limits, init, opts)
                                                : solve_case_II(ch, limits, init, opts);
    out.init = init;
    return out;
}

}  // namespace twr
