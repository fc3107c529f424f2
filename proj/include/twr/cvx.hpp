#pragma once

#include "twr/channels.hpp"
#include "twr/types.hpp"
#include "twr/waterfill.hpp"

#include <optional>
#include <string>
#include <vector>

namespace twr {

enum class RateKind { MacSum, Uplink1, Uplink2 };
enum class Sense { AtLeast, Equal };

struct RateConstraint {
    RateKind kind = RateKind::MacSum;
    Sense sense = Sense::AtLeast;
    double bound = 0.0;  // bits
};

RateKind uplink_kind(Source s);

enum class Objective { MinTotalTrace, MaxMacSum, MaxUplink1, MaxUplink2 };

Objective max_uplink(Source s);

struct LogDetProgram {
    Objective objective = Objective::MinTotalTrace;
    std::vector<RateConstraint> constraints;
    double p1max = 0.0;
    double p2max = 0.0;
    // A fixed block is held at the given value and is not a variable.
    std::optional<CMatrix> fixed_d1;
    std::optional<CMatrix> fixed_d2;

    double budget(Source s) const { return s == Source::One ? p1max : p2max; }
    const std::optional<CMatrix>& fixed(Source s) const { return s == Source::One ? fixed_d1 : fixed_d2; }

    // Throws InvalidProgram when malformed for the given channel.
    void validate(const ChannelSet& ch) const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIters };

const char* status_name(SolveStatus s);

struct CvxSolution {
    CovPair d;
    SolveStatus status = SolveStatus::MaxIters;
    double objective_value = 0.0;
    double kkt_residual = 0.0;
    std::vector<double> constraint_slacks;  // rate - bound, bits
    // Dual certificate; duals of dropped (trivially satisfied) rows are zero.
    std::vector<double> rate_duals;
    double budget_dual1 = 0.0;
    double budget_dual2 = 0.0;
    CMatrix psd_dual1;
    CMatrix psd_dual2;
    // Max-slack value of the phase-1 program, bits (positive when strictly feasible).
    double phase1_slack = 0.0;
    // Amount every rate row was relaxed when the feasible set had no interior.
    double bound_relaxation = 0.0;
    int newton_steps = 0;
};

// Default tolerance of the generic solver (relative duality gap).
inline constexpr double kSolverTol = 1e-9;
// Phase-1 slack below this (bits) certifies infeasibility.
inline constexpr double kInfeasibleSlack = 1e-6;

// Primal log-barrier Newton method over Hermitian blocks.
CvxSolution solve(const ChannelSet& ch, const LogDetProgram& prog, double tol = kSolverTol);

// Recomputes the KKT residual of a returned solution from (ch, prog, sol) alone.
double kkt_residual(const ChannelSet& ch, const LogDetProgram& prog, const CvxSolution& sol);

// Sum-capacity covariances by iterative waterfilling on the whitened channels.
CvxSolution mac_capacity(const ChannelSet& ch, double p1max, double p2max, double tol = 1e-11);

struct FeasibilityResult {
    bool feasible = false;
    double value = 0.0;     // optimum of the binding rate (bits), or phase-1 slack when infeasible
    double required = 0.0;  // bound of the binding constraint
    CovPair witness;
    SolveStatus status = SolveStatus::MaxIters;
};

// Maximises the binding row's rate under the other rows and the budgets and
// compares the optimum with that row's bound.
FeasibilityResult feasible(const ChannelSet& ch, const std::vector<RateConstraint>& constraints, double p1max,
                           double p2max, std::size_t binding = 0, double tol = kSolverTol);

// ---- whitened single-user helpers ----

// Effective gains and eigenbasis of user u with the other user's covariance
// treated as coloured noise at the relay.
struct Whitened {
    GainVector gains;
    CMatrix basis;  // eigenvectors matching gains, then null directions
};

Whitened whitened_channel(const ChannelSet& ch, Source u, const CMatrix& other);

// Full-budget waterfill of user u against the other user's covariance.
CMatrix best_response(const ChannelSet& ch, Source u, const CMatrix& other, double budget);

// Minimum-trace covariance of user u reaching conditional rate `rate` against
// the other user's covariance. Throws UnachievableRate when no mode exists.
CMatrix min_power_for_rate(const ChannelSet& ch, Source u, const CMatrix& other, double rate);

}  // namespace twr
