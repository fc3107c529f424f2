#include "twr/waterfill.hpp"

#include <algorithm>
#include <cmath>

namespace twr {

LevelAlloc waterfill(const GainVector& gains, double budget) {
    if (!(budget >= 0.0) || !std::isfinite(budget)) throw InvalidInput("waterfill budget must be finite and >= 0");
    LevelAlloc out;
    const int r = gains.rank();
    if (r == 0) {
        out.unallocatable = budget > 0.0;
        return out;
    }

    // Largest active set m whose level clears 1/alpha(m).
    double inv_sum = 0.0;
    int active = 1;
    double level = budget + 1.0 / gains[0];
    for (int m = 1; m <= r; ++m) {
        inv_sum += 1.0 / gains[m - 1];
        const double candidate = (budget + inv_sum) / m;
        if (candidate <= 1.0 / gains[m - 1]) break;
        active = m;
        level = candidate;
    }

    out.inv_level = level;
    out.powers.assign(static_cast<std::size_t>(r), 0.0);
    double rate = 0.0;
    for (int k = 0; k < active; ++k) {
        const double p = std::max(0.0, level - 1.0 / gains[k]);
        out.powers[static_cast<std::size_t>(k)] = p;
        rate += std::log2(std::max(1.0, level * gains[k]));
    }
    out.rate = rate;
    return out;
}

double rate_at_level(const GainVector& gains, double inv_level) {
    if (inv_level < 0.0) throw InvalidInput("inverse water-level must be >= 0");
    double rate = 0.0;
    for (double a : gains.values()) {
        const double x = inv_level * a;
        if (x <= 1.0) break;
        rate += std::log2(x);
    }
    return rate;
}

double power_at_level(const GainVector& gains, double inv_level) {
    if (inv_level < 0.0) throw InvalidInput("inverse water-level must be >= 0");
    double p = 0.0;
    for (double a : gains.values()) {
        const double d = inv_level - 1.0 / a;
        if (d <= 0.0) break;
        p += d;
    }
    return p;
}

double level_for_rate(const GainVector& gains, double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw InvalidInput("target rate must be finite and >= 0");
    if (gains.empty()) {
        if (rate > 0.0) throw UnachievableRate("positive rate requested on an empty gain set");
        return 0.0;
    }
    if (rate == 0.0) return 1.0 / gains[0];

    const int r = gains.rank();
    double log_sum = 0.0;
    double level = 0.0;
    for (int m = 1; m <= r; ++m) {
        log_sum += std::log2(gains[m - 1]);
        level = std::exp2((rate - log_sum) / m);
        if (m == r || level <= 1.0 / gains[m]) break;
    }

    // Closed form is exact per segment; bisection only guards rounding at
    // breakpoints.
    const double tol = 1e-12 * std::max(1.0, rate);
    if (std::abs(rate_at_level(gains, level) - rate) <= tol) return level;
    double lo = 1.0 / gains[0];
    double hi = std::max(level, lo) * 2.0;
    while (rate_at_level(gains, hi) < rate) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rate_at_level(gains, mid) < rate ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace twr
