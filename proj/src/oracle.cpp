#include "twr/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <tuple>
#include <vector>

namespace twr {

namespace {

struct Gains {
    double a1, a2;  // uplinks
    double g1, g2;  // relay -> node 1, relay -> node 2
};

double lg(double gain, double p) { return std::log2(1.0 + gain * p); }

double two_way(const Gains& g, double p1, double p2, double q1, double q2) {
    const double rma = std::log2(1.0 + g.a1 * p1 + g.a2 * p2);
    return 0.5 * std::min(rma, std::min(lg(g.g1, q1), lg(g.a2, p2)) + std::min(lg(g.g2, q2), lg(g.a1, p1)));
}

struct Axis {
    double lo = 0.0;
    double step = 0.0;
    int count = 1;

    double at(int k) const { return k == count - 1 && hi_exact ? hi : lo + step * k; }
    double hi = 0.0;
    bool hi_exact = false;
};

Axis full_axis(double cap, int steps) {
    Axis a;
    if (cap <= 0.0) return a;
    a.step = cap / steps;
    a.count = steps + 1;
    a.hi = cap;
    a.hi_exact = true;
    return a;
}

// `steps` cells across [center - half, center + half], clipped to [0, cap].
Axis zoom_axis(double center, double half, double cap, int steps) {
    Axis a;
    if (cap <= 0.0 || half <= 0.0) {
        a.lo = std::clamp(center, 0.0, std::max(cap, 0.0));
        return a;
    }
    a.step = 2.0 * half / steps;
    const int below = std::min(steps / 2, static_cast<int>(std::floor(center / a.step)));
    const int above = std::min(steps / 2, static_cast<int>(std::floor((cap - center) / a.step)));
    a.lo = center - below * a.step;
    a.count = below + above + 1;
    if (center + (steps / 2) * a.step >= cap && above < steps / 2) {
        // Keep the cap itself on the grid.
        a.count += 1;
        a.hi = cap;
        a.hi_exact = true;
    }
    return a;
}

// Best rate at full source power; concave in the relay split.
std::pair<double, double> best_rate(const Gains& g, const PowerLimits& lim, int steps) {
    if (lim.prmax <= 0.0) return {two_way(g, lim.p1max, lim.p2max, 0.0, 0.0), 0.0};
    double lo = 0.0, hi = lim.prmax;
    double best = -1.0, arg = 0.0;
    for (int pass = 0; pass < 6; ++pass) {
        const double h = (hi - lo) / steps;
        for (int k = 0; k <= steps; ++k) {
            const double q1 = std::min(lim.prmax, lo + h * k);
            const double v = two_way(g, lim.p1max, lim.p2max, q1, lim.prmax - q1);
            if (v > best) best = v, arg = q1;
        }
        lo = std::max(0.0, arg - 2.0 * h);
        hi = std::min(lim.prmax, arg + 2.0 * h);
    }
    return {best, arg};
}

struct Point {
    int a = -1, b = -1;
    double q1 = 0.0, q2 = 0.0;
    double power = std::numeric_limits<double>::infinity();
};

bool cheaper(const Point& x, const Point& y) {
    if (x.power != y.power) return x.power < y.power;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
}

struct Box {
    Axis p1, p2;
};

int worker_count(int n) {
    return std::max(1, std::min<int>(n, static_cast<int>(std::thread::hardware_concurrency())));
}

// Cheapest relay split carrying a bottleneck sum `need`: rate t1 towards
// node 1, need - t1 towards node 2, t1 <= cap1 and need - t1 <= cap2. The
// cost (2^t1 - 1)/g1 + (2^(need-t1) - 1)/g2 is convex in t1.
bool cheapest_split(const Gains& g, double need, double cap1, double cap2, double& q1, double& q2) {
    q1 = q2 = 0.0;
    if (need <= 0.0) return true;
    double lo = std::max(0.0, need - cap2), hi = std::min(cap1, need);
    if (g.g1 <= 0.0) hi = std::min(hi, 0.0);
    if (g.g2 <= 0.0) lo = std::max(lo, need);
    if (lo > hi + 1e-15) return false;
    hi = std::max(lo, hi);
    double t1;
    if (g.g1 <= 0.0)
        t1 = 0.0;
    else if (g.g2 <= 0.0)
        t1 = need;
    else
        t1 = std::clamp(0.5 * (need + std::log2(g.g1 / g.g2)), lo, hi);
    const double t2 = std::max(0.0, need - t1);
    q1 = t1 > 0.0 ? std::expm1(t1 * std::log(2.0)) / g.g1 : 0.0;
    q2 = t2 > 0.0 ? std::expm1(t2 * std::log(2.0)) / g.g2 : 0.0;
    return true;
}

// Cheapest grid point of the box reaching `target`.
Point cheapest(const Gains& g, const PowerLimits& lim, const Box& box, double target) {
    const int workers = worker_count(box.p1.count);
    std::vector<Point> local(static_cast<std::size_t>(workers));
    const double need = 2.0 * target;

    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            Point& best = local[static_cast<std::size_t>(w)];
            for (int a = w; a < box.p1.count; a += workers) {
                const double p1 = box.p1.at(a);
                const double rb1 = lg(g.a1, p1);
                for (int b = 0; b < box.p2.count; ++b) {
                    const double p2 = box.p2.at(b);
                    if (p1 + p2 > best.power) break;
                    if (std::log2(1.0 + g.a1 * p1 + g.a2 * p2) < need) continue;
                    double q1, q2;
                    if (!cheapest_split(g, need, lg(g.a2, p2), rb1, q1, q2)) continue;
                    if (q1 + q2 > lim.prmax * (1.0 + 1e-12) + 1e-15) continue;
                    const Point p{a, b, q1, q2, p1 + p2 + q1 + q2};
                    if (cheaper(p, best)) best = p;
                }
            }
        });
    for (auto& t : pool) t.join();

    Point best;
    for (const Point& p : local)
        if (p.a >= 0 && (best.a < 0 || cheaper(p, best))) best = p;
    return best;
}

}  // namespace

OracleResult scalar_oracle(const ChannelSet& ch, const PowerLimits& limits, int steps, int zoom_passes) {
    ch.validate();
    if (!ch.is_scalar()) throw InvalidInput("scalar_oracle: channels must be 1x1");
    if (steps < 2) throw InvalidInput("scalar_oracle: steps must be at least 2");
    if (limits.p1max < 0.0 || limits.p2max < 0.0 || limits.prmax < 0.0)
        throw InvalidInput("scalar_oracle: negative power limit");
    steps += steps % 2;

    const Gains g{std::norm(ch.h1r(0, 0)) / ch.sigma2_r, std::norm(ch.h2r(0, 0)) / ch.sigma2_r,
                  std::norm(ch.hr1(0, 0)) / ch.sigma2_1, std::norm(ch.hr2(0, 0)) / ch.sigma2_2};

    OracleResult res;
    res.steps = steps;
    const auto [top, q1_top] = best_rate(g, limits, 50 * steps);
    res.r_tw = top;

    // Stage-1 scan step times the largest slope of the objective in q1.
    const double scan_step = limits.prmax / (50.0 * steps) * std::pow(4.0 / (50.0 * steps), 5);
    res.modulus = 0.5 / std::log(2.0) * std::max(g.g1, g.g2) * scan_step + 1e-12;
    const double target = top - res.modulus;

    Box box{full_axis(limits.p1max, steps), full_axis(limits.p2max, steps)};
    res.p1 = limits.p1max;
    res.p2 = limits.p2max;
    res.q1 = q1_top;
    res.q2 = limits.prmax - q1_top;
    res.total_power = limits.p1max + limits.p2max + limits.prmax;

    for (int pass = 0; pass <= zoom_passes; ++pass) {
        const Point p = cheapest(g, limits, box, target);
        res.grid_step = std::max(box.p1.step, box.p2.step);
        if (p.a < 0) break;
        res.p1 = box.p1.at(p.a);
        res.p2 = box.p2.at(p.b);
        res.q1 = p.q1;
        res.q2 = p.q2;
        res.total_power = p.power;
        if (res.grid_step == 0.0) break;
        box = Box{zoom_axis(res.p1, 4.0 * box.p1.step, limits.p1max, steps),
                  zoom_axis(res.p2, 4.0 * box.p2.step, limits.p2max, steps)};
    }
    return res;
}

}  // namespace twr
