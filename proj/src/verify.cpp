#include "twr/verify.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace twr {

namespace {

// Audit-side arithmetic: eigenvalue log-dets and bisection level inversion,
// deliberately not shared with the solver's closed forms.

double logdet2_eig(const CMatrix& a) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(a, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) s += std::log2(std::max(es.eigenvalues()(k), 1e-300));
    return s;
}

CMatrix eye(Eigen::Index n) { return CMatrix::Identity(n, n); }

double link_rate(const CMatrix& h, const CMatrix& cov, double noise) {
    if (h.size() == 0) return 0.0;
    return logdet2_eig(eye(h.rows()) + h * cov * h.adjoint() / noise);
}

struct Modes {
    std::vector<double> gains;  // descending, positive
    CMatrix v;                  // eigenvectors of H^H H, columns matching `all`
    std::vector<double> all;    // every eigenvalue of H^H H / noise, same order as v
};

Modes modes_of(const CMatrix& h, double noise) {
    Modes m;
    const CMatrix g = h.adjoint() * h / noise;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
    m.v = es.eigenvectors();
    double top = 0.0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) top = std::max(top, es.eigenvalues()(k));
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        const double e = es.eigenvalues()(k);
        m.all.push_back(e > 1e-10 * top && e > 0.0 ? e : 0.0);
        if (e > 1e-10 * top && e > 0.0) m.gains.push_back(e);
    }
    std::sort(m.gains.begin(), m.gains.end(), std::greater<>());
    return m;
}

double rate_of_level(const std::vector<double>& g, double level) {
    double r = 0.0;
    for (double a : g) r += std::log2(std::max(1.0, level * a));
    return r;
}

double power_of_level(const std::vector<double>& g, double level) {
    double p = 0.0;
    for (double a : g) p += std::max(0.0, level - 1.0 / a);
    return p;
}

// Smallest level reproducing `rate`; zero rate maps to the lowest threshold.
double level_of_rate(const std::vector<double>& g, double rate) {
    if (g.empty()) return rate > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    double lo = 1.0 / g.front();
    if (rate <= 0.0) return lo;
    double hi = 2.0 * lo;
    while (rate_of_level(g, hi) < rate) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rate_of_level(g, mid) < rate ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double level_of_power(const std::vector<double>& g, double power) {
    if (g.empty()) return 0.0;
    double lo = 1.0 / g.front();
    if (power <= 0.0) return lo;
    double hi = lo + power;
    while (power_of_level(g, hi) < power) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (power_of_level(g, mid) < power ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> merged(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> m(a);
    m.insert(m.end(), b.begin(), b.end());
    std::sort(m.begin(), m.end(), std::greater<>());
    return m;
}

Check make(bool pass, double residual) {
    Check c;
    c.applicable = true;
    c.pass = pass && std::isfinite(residual);
    c.residual = residual;
    return c;
}

double rel(double x) { return std::max(1.0, std::abs(x)); }

}  // namespace

bool AuditReport::all_pass() const {
    for (const auto& [name, c] : entries())
        if (!c.pass) return false;
    return true;
}

std::vector<std::pair<std::string, Check>> AuditReport::entries() const {
    const std::pair<const char*, const Check*> all[] = {
        {"cond_13a_pair1", &cond_13a_pair1}, {"cond_13a_pair2", &cond_13a_pair2},
        {"cond_13b", &cond_13b},             {"full_relay_power", &full_relay_power},
        {"theorem1", &theorem1},             {"theorem2_props", &theorem2_props},
        {"theorem3_props", &theorem3_props}, {"lemma2", &lemma2},
        {"budget_checks", &budget_checks},   {"relay_consistency", &relay_consistency},
        {"rate_consistency", &rate_consistency},
    };
    std::vector<std::pair<std::string, Check>> out;
    for (const auto& [name, c] : all)
        if (c->applicable) out.emplace_back(name, *c);
    return out;
}

AuditReport check_necessary(const ChannelSet& ch, const PowerLimits& limits, const NetSolution& sol,
                            const AuditTolerances& tol) {
    AuditReport rep;

    const Modes m1 = modes_of(ch.hr1, ch.sigma2_1);
    const Modes m2 = modes_of(ch.hr2, ch.sigma2_2);
    const std::vector<double> both = merged(m1.gains, m2.gains);
    auto gains = [&](Source s) -> const std::vector<double>& { return s == Source::One ? m1.gains : m2.gains; };

    const double rbar1 = link_rate(ch.h1r, sol.d.d1, ch.sigma2_r);
    const double rbar2 = link_rate(ch.h2r, sol.d.d2, ch.sigma2_r);
    const double rma = ch.nr() == 0 ? 0.0
                                    : logdet2_eig(eye(ch.nr()) + (ch.h1r * sol.d.d1 * ch.h1r.adjoint() +
                                                                 ch.h2r * sol.d.d2 * ch.h2r.adjoint()) /
                                                                    ch.sigma2_r);
    const double rhat1 = link_rate(ch.hr1, sol.relay.b1, ch.sigma2_1);
    const double rhat2 = link_rate(ch.hr2, sol.relay.b2, ch.sigma2_2);
    auto rbar = [&](Source s) { return s == Source::One ? rbar1 : rbar2; };
    auto rhat = [&](Source s) { return s == Source::One ? rhat1 : rhat2; };

    // Relative levels: inv_mu of source s lives on the gains of the other side.
    auto inv_mu = [&](Source s) { return level_of_rate(gains(other(s)), rbar(s)); };
    const double inv_mu_ma = level_of_rate(both, rma);
    auto inv_lambda = [&](Source s) { return level_of_rate(gains(s), rhat(s)); };

    // Relay side i carries the message of source j to node i.
    for (Source i : {Source::One, Source::Two}) {
        const Source j = other(i);
        const double slack = inv_mu(j) - inv_lambda(i);
        Check c = make(slack >= -tol.level_slack * rel(inv_mu(j)), slack);
        (i == Source::One ? rep.cond_13a_pair1 : rep.cond_13a_pair2) = c;
    }

    const double r_bd = std::min(rhat1, rbar2) + std::min(rhat2, rbar1);
    const double gap = r_bd - rma;
    rep.cond_13b = make(std::abs(gap) <= std::max(tol.eps, 1e-6), gap);

    const double relay_power = sol.relay.b1.trace().real() + sol.relay.b2.trace().real();
    const SubcaseLabel lab = sol.subcase.label;
    if (lab == SubcaseLabel::I_1 || lab == SubcaseLabel::I_2 || lab == SubcaseLabel::II_4) {
        const double r = relay_power - limits.prmax;
        rep.full_relay_power = make(std::abs(r) <= tol.power * rel(limits.prmax), r);
    }

    const double inv_lambda0 = level_of_power(both, limits.prmax);
    if (lab == SubcaseLabel::I_1) {
        double r = 0.0;
        if (!both.empty() && inv_mu_ma > 0.0 && inv_lambda0 > 0.0) r = std::abs(1.0 / inv_mu_ma - 1.0 / inv_lambda0);
        rep.theorem1 = make(r <= tol.theorem1, r);
    }

    if (sol.subcase.has_pair() && (lab == SubcaseLabel::I_2 || lab == SubcaseLabel::II_4)) {
        const Source i = sol.subcase.i, j = sol.subcase.j;
        const double lo = std::min(inv_mu(Source::One), inv_mu(Source::Two));
        double upper = inv_lambda0;
        if (lab == SubcaseLabel::II_4) {
            const double rma0 = logdet2_eig(eye(ch.nr()) + (ch.h1r * sol.init.d0.d1 * ch.h1r.adjoint() +
                                                           ch.h2r * sol.init.d0.d2 * ch.h2r.adjoint()) /
                                                              ch.sigma2_r);
            upper = level_of_rate(both, rma0);
        }
        const double lvl_tol = tol.level_slack * rel(upper);
        // Positive residual means a violated ordering.
        const double v_low = lo - inv_mu_ma;
        const double v_high = inv_mu_ma - upper;
        const double v_power = std::abs(relay_power - limits.prmax) - tol.power * rel(limits.prmax);
        const double v_order = inv_mu(j) - inv_mu(i);
        const double worst = std::max({v_low, v_high, v_power, v_order});
        const bool ok = v_low <= lvl_tol && v_high <= lvl_tol && v_power <= 0.0 && v_order < 0.0;
        (lab == SubcaseLabel::I_2 ? rep.theorem2_props : rep.theorem3_props) = make(ok, worst);
    }

    {
        const Source hi = inv_lambda(Source::One) >= inv_lambda(Source::Two) ? Source::One : Source::Two;
        const Source lo = other(hi);
        const double spread = inv_lambda(hi) - inv_lambda(lo);
        if (spread > tol.level_slack * rel(inv_lambda(hi)) && rhat(lo) > 0.0) {
            const double r = inv_lambda(lo) - inv_mu(hi);
            rep.lemma2 = make(std::abs(r) <= tol.level_slack * rel(inv_mu(hi)) + 1e-6, r);
        }
    }

    {
        double worst = -std::numeric_limits<double>::infinity();
        auto excess = [&](const CMatrix& c, double cap) {
            worst = std::max(worst, c.trace().real() - cap * (1.0 + 1e-9) - 1e-12);
            if (c.size() > 0) {
                Eigen::SelfAdjointEigenSolver<CMatrix> es(c, Eigen::EigenvaluesOnly);
                worst = std::max(worst, -es.eigenvalues().minCoeff() - 1e-9 * rel(cap));
            }
        };
        excess(sol.d.d1, limits.p1max);
        excess(sol.d.d2, limits.p2max);
        excess(sol.relay.b1, limits.prmax);
        excess(sol.relay.b2, limits.prmax);
        worst = std::max(worst, relay_power - limits.prmax - tol.power * rel(limits.prmax));
        rep.budget_checks = make(worst <= 0.0, worst);
    }

    {
        double worst = 0.0;
        for (Source s : {Source::One, Source::Two}) {
            const Modes& m = s == Source::One ? m1 : m2;
            const double level = sol.relay.inv_lambda(s);
            std::vector<double> p(m.all.size());
            for (std::size_t k = 0; k < p.size(); ++k) p[k] = m.all[k] > 0.0 ? std::max(0.0, level - 1.0 / m.all[k]) : 0.0;
            RVector pv = Eigen::Map<RVector>(p.data(), static_cast<Eigen::Index>(p.size()));
            const CMatrix b = m.v * pv.cast<Complex>().asDiagonal() * m.v.adjoint();
            const CMatrix& stored = sol.relay.b(s);
            const double scale = rel(b.trace().real());
            if (stored.rows() != b.rows()) {
                worst = std::numeric_limits<double>::infinity();
                continue;
            }
            worst = std::max(worst, (stored - b).norm() / scale);
        }
        worst = std::max(worst, std::abs(sol.relay.relay_power - relay_power) / rel(relay_power));
        rep.relay_consistency = make(worst <= 1e-8, worst);
    }

    {
        const double rtw = 0.5 * std::min(rma, r_bd);
        const double diffs[] = {
            sol.rates.r_ma - rma,       sol.rates.rbar_1r - rbar1,
            sol.rates.rbar_2r - rbar2,  sol.rates.rhat_r1 - rhat1,
            sol.rates.rhat_r2 - rhat2,  sol.rates.r_tw - rtw,
            sol.powers.p1 - sol.d.trace(Source::One), sol.powers.p2 - sol.d.trace(Source::Two),
            sol.powers.pr - relay_power,
        };
        double worst = 0.0;
        for (double d : diffs) worst = std::max(worst, std::abs(d));
        rep.rate_consistency = make(worst <= 1e-8 * std::max(1.0, rma), worst);
    }

    return rep;
}

OracleComparison compare_to_oracle(const NetSolution& sol, const OracleResult& oracle, double rate_tol,
                                   double power_tol) {
    OracleComparison c;
    c.d_rate = sol.rates.r_tw - oracle.r_tw;
    c.d_power = sol.powers.total() - oracle.total_power;
    c.rel_power = c.d_power / std::max(1.0, oracle.total_power);
    c.pass = std::abs(c.d_rate) <= rate_tol && std::abs(c.rel_power) <= power_tol;
    return c;
}

}  // namespace twr
