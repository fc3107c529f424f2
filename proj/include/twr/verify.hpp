#pragma once

#include "twr/channels.hpp"
#include "twr/netopt.hpp"
#include "twr/types.hpp"

#include <string>
#include <vector>

namespace twr {

struct Check {
    bool applicable = false;
    bool pass = true;
    double residual = 0.0;  // signed where a sign is meaningful, else magnitude
};

struct AuditReport {
    Check cond_13a_pair1;  // inverse level of relay side 1 against the level of source 2
    Check cond_13a_pair2;
    Check cond_13b;
    Check full_relay_power;
    Check theorem1;
    Check theorem2_props;
    Check theorem3_props;
    Check lemma2;
    Check budget_checks;
    Check relay_consistency;  // stored B against the waterfill at the stored levels
    Check rate_consistency;   // stored rates against recomputed ones

    bool all_pass() const;
    // Name/check pairs in a fixed order, applicable ones only.
    std::vector<std::pair<std::string, Check>> entries() const;
};

struct AuditTolerances {
    double eps = 1e-6;          // bisection tolerance used by the solve
    double level_slack = 1e-6;  // allowed violation of the level ordering
    double power = 1e-6;
    double theorem1 = 1e-5;
    double rate = 1e-9;
};

// Recomputes every quantity from the raw matrices of (ch, sol).
AuditReport check_necessary(const ChannelSet& ch, const PowerLimits& limits, const NetSolution& sol,
                            const AuditTolerances& tol = {});

struct OracleResult {
    double p1 = 0.0, p2 = 0.0, q1 = 0.0, q2 = 0.0;
    double r_tw = 0.0;
    double total_power = 0.0;  // minimal total among points tied with the best rate
    double grid_step = 0.0;    // finest step reached
    double modulus = 0.0;      // rate tie tolerance at the finest step
    int steps = 0;
};

// Brute-force grid over (p1, p2, q1, q2) for 1x1 links, refined by zooming
// around the incumbent.
OracleResult scalar_oracle(const ChannelSet& ch, const PowerLimits& limits, int steps = 200, int zoom_passes = 3);

struct OracleComparison {
    bool pass = false;
    double d_rate = 0.0;       // solver minus oracle, bits
    double d_power = 0.0;      // solver minus oracle
    double rel_power = 0.0;    // d_power / max(1, oracle power)
};

OracleComparison compare_to_oracle(const NetSolution& sol, const OracleResult& oracle, double rate_tol = 1e-2,
                                   double power_tol = 0.02);

}  // namespace twr
