#include "twr/harness.hpp"

#include "twr/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

namespace twr {

namespace {

constexpr const char* kSchema = "v1";

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void set_axis(RunConfig& c, AxisField f, double v) {
    switch (f) {
        case AxisField::P1max: c.p1max = v; break;
        case AxisField::P2max: c.p2max = v; break;
        case AxisField::Prmax: c.prmax = v; break;
        case AxisField::N1: c.n1 = static_cast<int>(v); break;
        case AxisField::N2: c.n2 = static_cast<int>(v); break;
        case AxisField::Nr: c.nr = static_cast<int>(v); break;
        case AxisField::V1: c.v1 = v; break;
        case AxisField::V2: c.v2 = v; break;
    }
}

// Axis coordinates of every cell, first axis slowest.
std::vector<std::vector<double>> cell_coords(const RunConfig& cfg) {
    std::vector<std::vector<double>> out;
    if (cfg.axes.empty()) return {{}};
    if (cfg.zip) {
        for (std::size_t k = 0; k < cfg.axes.front().values.size(); ++k) {
            std::vector<double> c;
            for (const SweepAxis& a : cfg.axes) c.push_back(a.values[k]);
            out.push_back(std::move(c));
        }
        return out;
    }
    out.push_back({});
    for (const SweepAxis& a : cfg.axes) {
        std::vector<std::vector<double>> next;
        for (const auto& prefix : out)
            for (double v : a.values) {
                auto c = prefix;
                c.push_back(v);
                next.push_back(std::move(c));
            }
        out = std::move(next);
    }
    return out;
}

// Budgets for one oracle trial, drawn from a stream separate from the channels.
PowerLimits trial_limits(const RunConfig& cfg, int trial) {
    if (!cfg.random_limits) return cfg.limits();
    CounterRng rng(mix_seed(trial_seed(cfg.seed, trial), 0x6C696D697473ULL));
    auto draw = [&] { return cfg.power_lo + (cfg.power_hi - cfg.power_lo) * rng.next_open01(); };
    const double p1 = draw();
    const double p2 = draw();
    return {p1, p2, draw()};
}

struct TrialOutcome {
    bool solved = false;
    bool failed = false;
    SubcaseLabel label = SubcaseLabel::I_1;
    double rtw = 0.0;
    double power = 0.0;
};

}  // namespace

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    const int workers = std::max(1, std::min(n, jobs));
    if (workers <= 1) {
        for (int k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int k = next++; k < n; k = next++) fn(k);
        });
    for (auto& t : pool) t.join();
}

SingleRun run_single(const RunConfig& cfg) {
    cfg.validate();
    SingleRun r;
    r.channels = generate_channels(cfg.channel_spec(0));
    r.limits = cfg.limits();
    r.solution = network_optimize(r.channels, r.limits, cfg.options());
    AuditTolerances tol;
    tol.eps = cfg.eps;
    r.audit = check_necessary(r.channels, r.limits, r.solution, tol);
    return r;
}

std::vector<SweepCell> run_sweep(const RunConfig& cfg, int jobs) {
    cfg.validate();
    if (cfg.axes.empty()) throw ConfigError("sweep mode needs at least one [sweep] axis");
    const auto coords = cell_coords(cfg);
    const int trials = cfg.trials;
    const int total = static_cast<int>(coords.size()) * trials;

    std::vector<RunConfig> cells;
    for (const auto& c : coords) {
        RunConfig rc = cfg;
        for (std::size_t a = 0; a < c.size(); ++a) set_axis(rc, cfg.axes[a].field, c[a]);
        rc.validate();
        cells.push_back(rc);
    }

    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(total));
    parallel_for(total, jobs, [&](int k) {
        const RunConfig& rc = cells[static_cast<std::size_t>(k / trials)];
        const int trial = k % trials;
        TrialOutcome& o = outcomes[static_cast<std::size_t>(k)];
        try {
            const ChannelSet ch = generate_channels(rc.channel_spec(trial));
            const NetSolution s = network_optimize(ch, rc.limits(), rc.options());
            AuditTolerances tol;
            tol.eps = rc.eps;
            o.solved = true;
            o.label = s.subcase.label;
            o.rtw = s.rates.r_tw;
            o.power = s.powers.total();
            o.failed = s.status != SolveStatus::Optimal || !check_necessary(ch, rc.limits(), s, tol).all_pass();
        } catch (const std::exception&) {
            o.failed = true;
        }
    });

    std::vector<SweepCell> out;
    for (std::size_t c = 0; c < coords.size(); ++c) {
        SweepCell cell;
        cell.coords = coords[c];
        cell.trials = trials;
        int solved = 0;
        for (int t = 0; t < trials; ++t) {
            const TrialOutcome& o = outcomes[c * static_cast<std::size_t>(trials) + static_cast<std::size_t>(t)];
            if (o.failed) ++cell.failures;
            if (!o.solved) continue;
            ++solved;
            ++cell.counts[static_cast<std::size_t>(o.label)];
            cell.mean_rtw += o.rtw;
            cell.mean_power += o.power;
        }
        if (solved > 0) {
            cell.mean_rtw /= solved;
            cell.mean_power /= solved;
        }
        out.push_back(cell);
    }
    return out;
}

std::vector<OracleRow> run_oracle_suite(const RunConfig& cfg, int jobs) {
    cfg.validate();
    if (cfg.n1 != 1 || cfg.n2 != 1 || cfg.nr != 1) throw ConfigError("oracle suite needs n1 = n2 = nr = 1");
    std::vector<OracleRow> rows(static_cast<std::size_t>(std::max(0, cfg.trials)));
    parallel_for(cfg.trials, jobs, [&](int t) {
        OracleRow& r = rows[static_cast<std::size_t>(t)];
        r.trial = t;
        r.seed = trial_seed(cfg.seed, t);
        try {
            const ChannelSet ch = generate_channels(cfg.channel_spec(t));
            const PowerLimits lim = trial_limits(cfg, t);
            const NetSolution s = network_optimize(ch, lim, cfg.options());
            const OracleResult o = scalar_oracle(ch, lim, cfg.oracle_steps);
            const OracleComparison c = compare_to_oracle(s, o, cfg.rate_tol, cfg.power_tol);
            r.rtw_alg = s.rates.r_tw;
            r.rtw_oracle = o.r_tw;
            r.d_power = c.rel_power;
            r.pass = c.pass && s.status == SolveStatus::Optimal;
        } catch (const std::exception&) {
            r.pass = false;
        }
    });
    return rows;
}

void write_trace_csv(std::ostream& out, const NetSolution& sol) {
    out << "# twr-trace " << kSchema << "\n";
    out << "iter,R_obj,R_ma,R_bc_sum,R_tw,P1,P2,Pr\n";
    for (const TraceRow& r : sol.trace)
        out << r.iter << ',' << num(r.r_obj) << ',' << num(r.r_ma) << ',' << num(r.r_bc_sum) << ',' << num(r.r_tw)
            << ',' << num(r.p1) << ',' << num(r.p2) << ',' << num(r.pr) << '\n';
}

void write_summary_csv(std::ostream& out, const SingleRun& run) {
    const NetSolution& s = run.solution;
    out << "# twr-summary " << kSchema << "\n";
    out << "subcase,route,status,R_tw,R_ma,R_bc_sum,P1,P2,Pr,total_power,iters,exit_gap,audit\n";
    out << subcase_name(s.subcase.label) << ',' << route_name(s.route) << ',' << status_name(s.status) << ','
        << num(s.rates.r_tw) << ',' << num(s.rates.r_ma) << ',' << num(s.rates.bc_sum()) << ',' << num(s.powers.p1)
        << ',' << num(s.powers.p2) << ',' << num(s.powers.pr) << ',' << num(s.powers.total()) << ','
        << s.bisection_iters << ',' << num(s.exit_gap) << ',' << (run.audit.all_pass() ? "pass" : "fail") << '\n';
}

void write_sweep_csv(std::ostream& out, const RunConfig& cfg, const std::vector<SweepCell>& cells) {
    out << "# twr-sweep " << kSchema << "\n";
    for (const SweepAxis& a : cfg.axes) out << axis_key(a.field) << ',';
    out << "count_I1,count_I2,count_II1,count_II2,count_II3,count_II4,failures,mean_Rtw,mean_power,trials\n";
    for (const SweepCell& c : cells) {
        for (double v : c.coords) out << num(v) << ',';
        for (int n : c.counts) out << n << ',';
        out << c.failures << ',' << num(c.mean_rtw) << ',' << num(c.mean_power) << ',' << c.trials << '\n';
    }
}

void write_oracle_csv(std::ostream& out, const std::vector<OracleRow>& rows) {
    out << "# twr-oracle " << kSchema << "\n";
    out << "trial,seed,Rtw_alg,Rtw_oracle,dP,pass\n";
    for (const OracleRow& r : rows)
        out << r.trial << ',' << r.seed << ',' << num(r.rtw_alg) << ',' << num(r.rtw_oracle) << ',' << num(r.d_power)
            << ',' << (r.pass ? 1 : 0) << '\n';
}

}  // namespace twr
