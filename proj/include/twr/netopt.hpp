#pragma once

#include "twr/channels.hpp"
#include "twr/cvx.hpp"
#include "twr/types.hpp"
#include "twr/waterfill.hpp"

#include <optional>
#include <string>
#include <vector>

namespace twr {

enum class Case { I, II };

enum class SubcaseLabel { I_1, I_2, II_1, II_2, II_3, II_4 };

const char* subcase_name(SubcaseLabel s);
inline constexpr int kSubcaseCount = 6;

struct Subcase {
    SubcaseLabel label = SubcaseLabel::I_1;
    // Meaningful for I-2, II-2, II-3, II-4 only; i != j.
    Source i = Source::One;
    Source j = Source::Two;

    bool has_pair() const { return label != SubcaseLabel::I_1 && label != SubcaseLabel::II_1; }
};

struct RelayAlloc {
    double inv_lambda1 = 0.0;
    double inv_lambda2 = 0.0;
    CMatrix b1;
    CMatrix b2;
    double relay_power = 0.0;

    double inv_lambda(Source s) const { return s == Source::One ? inv_lambda1 : inv_lambda2; }
    const CMatrix& b(Source s) const { return s == Source::One ? b1 : b2; }
};

struct NetRates {
    double r_ma = 0.0;
    double rhat_r1 = 0.0;  // relay -> node 1
    double rhat_r2 = 0.0;  // relay -> node 2
    double rbar_1r = 0.0;  // node 1 -> relay
    double rbar_2r = 0.0;  // node 2 -> relay
    double r_tw = 0.0;

    double rhat(Source s) const { return s == Source::One ? rhat_r1 : rhat_r2; }
    double rbar(Source s) const { return s == Source::One ? rbar_1r : rbar_2r; }
    double bc_sum() const { return rhat_r1 + rhat_r2; }
};

struct NetPowers {
    double p1 = 0.0;
    double p2 = 0.0;
    double pr = 0.0;

    double total() const { return p1 + p2 + pr; }
};

struct TraceRow {
    int iter = 0;
    double r_obj = 0.0;
    double r_min = 0.0;
    double r_max = 0.0;
    double r_ma = 0.0;
    double r_bc_sum = 0.0;
    double r_tw = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;
    double pr = 0.0;
};

struct InitialAlloc {
    CovPair d0;
    double inv_lambda0 = 0.0;
    double r_ma0 = 0.0;
    double rhat_sum0 = 0.0;
    WaterLevels levels0;
};

// How the reported allocation was produced.
enum class Route { ClosedForm, ConvexProgram, OneShot, Bisection };

const char* route_name(Route r);

struct NetSolution {
    CovPair d;
    RelayAlloc relay;
    WaterLevels levels;
    NetRates rates;
    NetPowers powers;
    Subcase subcase;
    SolveStatus status = SolveStatus::Optimal;
    Route route = Route::ClosedForm;
    InitialAlloc init;
    std::vector<TraceRow> trace;

    int bisection_iters = 0;
    double bracket_width = 0.0;  // R_max at the start of the bisection
    double exit_gap = 0.0;       // |sum R_hat - R_ma| at the bisection exit
    bool one_shot_tried = false;
    bool one_shot_fallback = false;  // gate passed but the one-shot output was rejected
    bool relay_capped = false;       // side j of the relay received no power
    std::string note;
};

struct NetOptions {
    double eps = 1e-6;
    int max_iters = 200;
    double solver_tol = kSolverTol;
    bool allow_one_shot = true;  // false forces the bisection path
};

// Worst-case bisection length for a bracket of width `width`.
int bisection_bound(double width, double eps);

InitialAlloc initial_allocation(const ChannelSet& ch, const PowerLimits& limits);

Case classify(const InitialAlloc& init);

NetSolution solve_case_I(const ChannelSet& ch, const PowerLimits& limits, const InitialAlloc& init,
                         const NetOptions& opts = {});

Subcase classify_subcase_II(const ChannelSet& ch, const PowerLimits& limits, const InitialAlloc& init);

NetSolution solve_case_II(const ChannelSet& ch, const PowerLimits& limits, const InitialAlloc& init,
                          const NetOptions& opts = {});

// Steps 2-6 of the Case I algorithm for a fixed index pair; also used for II-4.
NetSolution subcase_I2_pipeline(const ChannelSet& ch, const PowerLimits& limits, const InitialAlloc& init,
                                Subcase subcase, double r_max_start, const NetOptions& opts = {});

NetSolution network_optimize(const ChannelSet& ch, const PowerLimits& limits, const NetOptions& opts = {});

// Assembles a solution from source covariances and relay inverse levels.
NetSolution assemble(const ChannelSet& ch, const CovPair& d, double inv_lambda1, double inv_lambda2);

// Half the smaller of the MAC rate and the two-way bottleneck sum.
double two_way_rate(double r_ma, double rhat_r1, double rhat_r2, double rbar_1r, double rbar_2r);

}  // namespace twr
