#pragma once

#include "twr/channels.hpp"
#include "twr/types.hpp"

#include <vector>

namespace twr {

// Power split over a gain set at a common inverse level.
struct LevelAlloc {
    double inv_level = 0.0;
    std::vector<double> powers;  // p(k) = (inv_level - 1/alpha(k))+
    double rate = 0.0;           // bits
    bool unallocatable = false;  // positive budget but no usable mode
};

// Reciprocal relative water-levels of a source covariance pair.
struct WaterLevels {
    double inv_mu1 = 0.0;    // on the node-2 downlink gains, reproduces R_1r
    double inv_mu2 = 0.0;    // on the node-1 downlink gains, reproduces R_2r
    double inv_mu_ma = 0.0;  // on both gain sets, reproduces the MAC sum-rate

    double inv_mu(Source s) const { return s == Source::One ? inv_mu1 : inv_mu2; }
};

// Exact active-set waterfill; sum of powers equals budget.
LevelAlloc waterfill(const GainVector& gains, double budget);

double rate_at_level(const GainVector& gains, double inv_level);
double power_at_level(const GainVector& gains, double inv_level);

// Smallest-rate-consistent inverse of rate_at_level. R = 0 maps to 1/alpha(1).
// Throws UnachievableRate for R > 0 on an empty gain set.
double level_for_rate(const GainVector& gains, double rate);

// log2 det(A) for Hermitian positive definite A.
double log2det_hpd(const CMatrix& a);

double uplink_rate(const ChannelSet& ch, const CMatrix& d, Source i);
double mac_rate(const ChannelSet& ch, const CovPair& d);

// Gains of both downlinks; computing them once avoids repeated SVDs.
struct DownlinkGains {
    GainVector alpha1;
    GainVector alpha2;
    GainVector both;

    static DownlinkGains of(const ChannelSet& ch);
    const GainVector& of(Source s) const { return s == Source::One ? alpha1 : alpha2; }
};

WaterLevels relative_levels(const ChannelSet& ch, const CovPair& d);
WaterLevels relative_levels(const ChannelSet& ch, const DownlinkGains& g, const CovPair& d);

}  // namespace twr
