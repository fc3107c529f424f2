#pragma once

#include "twr/netopt.hpp"
#include "twr/verify.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace twr {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Fields a sweep may vary.
enum class AxisField { P1max, P2max, Prmax, N1, N2, Nr, V1, V2 };

const char* axis_key(AxisField f);

struct SweepAxis {
    AxisField field = AxisField::P1max;
    std::vector<double> values;
};

struct RunConfig {
    int n1 = 1, n2 = 1, nr = 1;
    double p1max = 1.0, p2max = 1.0, prmax = 1.0;
    double v1 = 1.0, v2 = 1.0;
    bool reciprocal = false;
    bool identical_sources = false;
    double sigma2_r = 1.0, sigma2_1 = 1.0, sigma2_2 = 1.0;

    std::uint64_t seed = 0;
    int trials = 1;
    double eps = 1e-6;
    int max_iters = 200;
    bool one_shot = true;

    // Oracle suite: per-trial budgets drawn uniformly from [power_lo, power_hi].
    bool random_limits = false;
    double power_lo = 0.1, power_hi = 5.0;
    int oracle_steps = 200;
    double rate_tol = 1e-2;
    double power_tol = 0.02;

    // Cartesian product of the axes, or element-wise pairing when `zip`.
    bool zip = false;
    std::vector<SweepAxis> axes;

    PowerLimits limits() const { return {p1max, p2max, prmax}; }
    NetOptions options() const;
    // Channel draw for one trial; equal (seed, trial) give equal draws.
    ChannelSpec channel_spec(int trial) const;
    // Throws ConfigError on non-positive dimensions or tolerances.
    void validate() const;
};

// Line-oriented `key = value` text with [system], [limits], [run] and
// [sweep] sections; `#` and `;` start comments; lists are comma separated.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

std::uint64_t trial_seed(std::uint64_t master, int trial);

struct SingleRun {
    ChannelSet channels;
    PowerLimits limits;
    NetSolution solution;
    AuditReport audit;
};

SingleRun run_single(const RunConfig& cfg);

struct SweepCell {
    std::vector<double> coords;  // one per axis, in axis order
    std::array<int, kSubcaseCount> counts{};
    int failures = 0;  // thrown solves, non-optimal status or failed audits
    double mean_rtw = 0.0;
    double mean_power = 0.0;
    int trials = 0;
};

// Trials run on `jobs` workers; results do not depend on the worker count.
std::vector<SweepCell> run_sweep(const RunConfig& cfg, int jobs = 1);

struct OracleRow {
    int trial = 0;
    std::uint64_t seed = 0;
    double rtw_alg = 0.0;
    double rtw_oracle = 0.0;
    double d_power = 0.0;  // relative, solver minus oracle
    bool pass = false;
};

std::vector<OracleRow> run_oracle_suite(const RunConfig& cfg, int jobs = 1);

// CSV writers: a versioned `#` header line, then a column row; %.12g floats.
void write_trace_csv(std::ostream& out, const NetSolution& sol);
void write_summary_csv(std::ostream& out, const SingleRun& run);
void write_sweep_csv(std::ostream& out, const RunConfig& cfg, const std::vector<SweepCell>& cells);
void write_oracle_csv(std::ostream& out, const std::vector<OracleRow>& rows);

// Calls fn(k) for k in [0, n) on a bounded pool of workers.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace twr
