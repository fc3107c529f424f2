#include "twr/cvx.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace twr {

RateKind uplink_kind(Source s) { return s == Source::One ? RateKind::Uplink1 : RateKind::Uplink2; }
Objective max_uplink(Source s) { return s == Source::One ? Objective::MaxUplink1 : Objective::MaxUplink2; }

const char* status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "OPTIMAL";
        case SolveStatus::Infeasible: return "INFEASIBLE";
        case SolveStatus::MaxIters: return "MAX_ITERS";
    }
    return "?";
}

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr int kMaxNewton = 4000;
constexpr double kStepGrowth = 15.0;
constexpr double kNewtonTol = 1e-10;

// A rate term uses one or both source covariances.
struct Term {
    bool uses[2] = {false, false};
};

Term term_of(RateKind k) {
    Term t;
    if (k == RateKind::MacSum || k == RateKind::Uplink1) t.uses[0] = true;
    if (k == RateKind::MacSum || k == RateKind::Uplink2) t.uses[1] = true;
    return t;
}

std::optional<RateKind> objective_kind(Objective o) {
    switch (o) {
        case Objective::MaxMacSum: return RateKind::MacSum;
        case Objective::MaxUplink1: return RateKind::Uplink1;
        case Objective::MaxUplink2: return RateKind::Uplink2;
        case Objective::MinTotalTrace: return std::nullopt;
    }
    return std::nullopt;
}

// Real basis of n x n Hermitian matrices; each element has at most two entries
// c * e_r e_s^T.
struct Entry {
    int r, s;
    Complex c;
};
struct BasisElem {
    int count = 0;
    Entry e[2];
};

std::vector<BasisElem> hermitian_basis(int n) {
    std::vector<BasisElem> b;
    for (int a = 0; a < n; ++a) b.push_back({1, {{a, a, 1.0}, {}}});
    for (int a = 0; a < n; ++a)
        for (int c = a + 1; c < n; ++c) b.push_back({2, {{a, c, 1.0}, {c, a, 1.0}}});
    for (int a = 0; a < n; ++a)
        for (int c = a + 1; c < n; ++c) b.push_back({2, {{a, c, Complex(0, 1)}, {c, a, Complex(0, -1)}}});
    return b;
}

// tr(E X)
double trace_with(const BasisElem& b, const CMatrix& x) {
    Complex s = 0.0;
    for (int p = 0; p < b.count; ++p) s += b.e[p].c * x(b.e[p].s, b.e[p].r);
    return s.real();
}

// Re tr(E_k A E_l B)
double trace_pair(const BasisElem& k, const CMatrix& a, const BasisElem& l, const CMatrix& b) {
    Complex s = 0.0;
    for (int p = 0; p < k.count; ++p)
        for (int q = 0; q < l.count; ++q)
            s += k.e[p].c * l.e[q].c * a(k.e[p].s, l.e[q].r) * b(l.e[q].s, k.e[p].r);
    return s.real();
}

CMatrix combine(const std::vector<BasisElem>& basis, const double* y, int n) {
    CMatrix m = CMatrix::Zero(n, n);
    for (std::size_t k = 0; k < basis.size(); ++k)
        for (int p = 0; p < basis[k].count; ++p) m(basis[k].e[p].r, basis[k].e[p].s) += y[k] * basis[k].e[p].c;
    return m;
}

CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

double lndet_hpd(const CMatrix& a, bool* ok) {
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success) {
        *ok = false;
        return 0.0;
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        const double d = llt.matrixLLT()(k, k).real();
        if (!(d > 0.0)) {
            *ok = false;
            return 0.0;
        }
        s += std::log(d);
    }
    *ok = true;
    return 2.0 * s;
}

CMatrix relay_matrix(const ChannelSet& ch, const Term& term, const CMatrix d[2]) {
    const int nr = ch.nr();
    CMatrix m = CMatrix::Identity(nr, nr);
    for (int u = 0; u < 2; ++u) {
        if (!term.uses[u]) continue;
        const CMatrix& h = ch.uplink(static_cast<Source>(u + 1));
        m += h * d[u] * h.adjoint() / ch.sigma2_r;
    }
    return hermitian_part(m);
}

double term_bits(const ChannelSet& ch, const Term& term, const CMatrix d[2]) {
    bool ok = true;
    const double v = lndet_hpd(relay_matrix(ch, term, d), &ok);
    return ok ? v / kLn2 : -std::numeric_limits<double>::infinity();
}

// Gradient of a term in bits with respect to D_u: H_u^H M^-1 H_u / (sigma_r^2 ln 2).
CMatrix term_gradient(const ChannelSet& ch, const Term& term, const CMatrix d[2], int u) {
    const CMatrix m = relay_matrix(ch, term, d);
    const CMatrix& h = ch.uplink(static_cast<Source>(u + 1));
    Eigen::LLT<CMatrix> llt(m);
    return hermitian_part(h.adjoint() * llt.solve(h)) / (ch.sigma2_r * kLn2);
}

struct Row {
    Term term;
    double bound = 0.0;
    std::size_t index = 0;  // position in the original constraint list
};

class BarrierSolver {
public:
    BarrierSolver(const ChannelSet& ch, const LogDetProgram& prog, double tol) : ch_(ch), prog_(prog), tol_(tol) {
        for (int u = 0; u < 2; ++u) {
            const Source s = static_cast<Source>(u + 1);
            n_[u] = ch.n(s);
            budget_[u] = prog.budget(s);
            if (prog.fixed(s)) {
                active_[u] = false;
                d_[u] = hermitian_part(*prog.fixed(s));
            } else if (budget_[u] <= 0.0) {
                active_[u] = false;
                d_[u] = CMatrix::Zero(n_[u], n_[u]);
            } else {
                active_[u] = true;
                d_[u] = (0.5 * budget_[u] / n_[u]) * CMatrix::Identity(n_[u], n_[u]);
                basis_[u] = hermitian_basis(n_[u]);
                offset_[u] = nvar_;
                nvar_ += static_cast<int>(basis_[u].size());
            }
        }
        if (auto k = objective_kind(prog.objective)) objective_term_ = term_of(*k);
    }

    CvxSolution run() {
        CvxSolution out;
        out.rate_duals.assign(prog_.constraints.size(), 0.0);

        // Rows with no variable block or a nonpositive bound are constants.
        bool constant_violation = false;
        double worst_constant = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < prog_.constraints.size(); ++c) {
            const auto& rc = prog_.constraints[c];
            Row row{term_of(rc.kind), rc.bound, c};
            const bool has_var = (row.term.uses[0] && active_[0]) || (row.term.uses[1] && active_[1]);
            if (rc.bound <= 0.0) continue;
            if (!has_var) {
                const double v = term_bits(ch_, row.term, d_) - rc.bound;
                worst_constant = std::min(worst_constant, v);
                if (v < -kInfeasibleSlack) constant_violation = true;
                continue;
            }
            rows_.push_back(row);
        }
        if (constant_violation) {
            out.status = SolveStatus::Infeasible;
            out.phase1_slack = worst_constant;
            out.d = {d_[0], d_[1]};
            finish_report(out, 0.0);
            return out;
        }

        if (nvar_ == 0) {
            out.status = SolveStatus::Optimal;
            out.d = {d_[0], d_[1]};
            finish_report(out, 0.0);
            return out;
        }

        if (rows_.empty() && prog_.objective == Objective::MinTotalTrace) {
            for (int u = 0; u < 2; ++u)
                if (active_[u]) d_[u].setZero();
            out.status = SolveStatus::Optimal;
            out.d = {d_[0], d_[1]};
            out.phase1_slack = std::numeric_limits<double>::infinity();
            finish_report(out, 0.0);
            return out;
        }

        if (!rows_.empty()) {
            const double slack = phase_one();
            out.phase1_slack = slack;
            if (status_ == SolveStatus::MaxIters) {
                out.status = SolveStatus::MaxIters;
                out.d = {d_[0], d_[1]};
                finish_report(out, 0.0);
                return out;
            }
            if (slack <= 0.0) {
                if (slack < -kInfeasibleSlack) {
                    out.status = SolveStatus::Infeasible;
                    out.d = {d_[0], d_[1]};
                    finish_report(out, 0.0);
                    return out;
                }
                // Interior is empty or nearly so: relax all rows by the
                // measured deficit so the barrier has room.
                shift_ = -slack + 1e-9;
                for (auto& r : rows_) r.bound -= shift_;
            }
        } else {
            out.phase1_slack = std::numeric_limits<double>::infinity();
        }

        const double t_final = centre_path();
        out.status = status_;
        out.d = {d_[0], d_[1]};
        finish_report(out, t_final);

        for (std::size_t c = 0; c < prog_.constraints.size(); ++c) {
            if (prog_.constraints[c].sense == Sense::Equal && out.constraint_slacks[c] > kInfeasibleSlack) {
                throw InvalidProgram("equality rate constraint is slack at the minimum; program is ill-posed");
            }
        }
        return out;
    }

private:
    int dim(bool phase1) const { return nvar_ + (phase1 ? 1 : 0); }

    int barrier_weight() const {
        int m = static_cast<int>(rows_.size());
        for (int u = 0; u < 2; ++u)
            if (active_[u]) m += 1 + n_[u];
        return m;
    }

    double objective_value(const CMatrix d[2]) const {
        if (objective_term_) return term_bits(ch_, *objective_term_, d);
        double s = 0.0;
        for (int u = 0; u < 2; ++u) s += d[u].trace().real();
        return s;
    }

    // Barrier value; returns +inf outside the domain.
    double phi(const CMatrix d[2], double s, bool phase1, double t) const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        double val = 0.0;
        for (int u = 0; u < 2; ++u) {
            if (!active_[u]) continue;
            bool ok = true;
            const double ld = lndet_hpd(d[u], &ok);
            if (!ok) return inf;
            const double q = budget_[u] - d[u].trace().real();
            if (!(q > 0.0)) return inf;
            val -= ld + std::log(q);
        }
        for (const auto& r : rows_) {
            const double w = term_bits(ch_, r.term, d) - r.bound - (phase1 ? s : 0.0);
            if (!(w > 0.0)) return inf;
            val -= std::log(w);
        }
        if (phase1) {
            val -= t * s;
        } else if (objective_term_) {
            val -= t * term_bits(ch_, *objective_term_, d);
        } else {
            for (int u = 0; u < 2; ++u)
                if (active_[u]) val += t * d[u].trace().real();
        }
        return val;
    }

    // Gradient (scaled coordinates) and Hessian of a rate term in bits.
    void term_derivatives(const Term& term, const CMatrix l[2], Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
        g.setZero(nvar_);
        h.setZero(nvar_, nvar_);
        const CMatrix m = relay_matrix(ch_, term, d_);
        Eigen::LLT<CMatrix> llt(m);
        const double sr = std::sqrt(ch_.sigma2_r);
        CMatrix k[2], w[2];
        for (int u = 0; u < 2; ++u) {
            if (!term.uses[u] || !active_[u]) continue;
            k[u] = ch_.uplink(static_cast<Source>(u + 1)) * l[u] / sr;
            w[u] = llt.solve(k[u]);
        }
        for (int u = 0; u < 2; ++u) {
            if (!term.uses[u] || !active_[u]) continue;
            const CMatrix cuu = hermitian_part(k[u].adjoint() * w[u]);
            for (std::size_t a = 0; a < basis_[u].size(); ++a)
                g(offset_[u] + static_cast<int>(a)) = trace_with(basis_[u][a], cuu) / kLn2;
            for (int v = 0; v < 2; ++v) {
                if (!term.uses[v] || !active_[v]) continue;
                const CMatrix cuv = k[u].adjoint() * w[v];
                const CMatrix cvu = cuv.adjoint();
                for (std::size_t a = 0; a < basis_[u].size(); ++a)
                    for (std::size_t b = 0; b < basis_[v].size(); ++b)
                        h(offset_[u] + static_cast<int>(a), offset_[v] + static_cast<int>(b)) =
                            -trace_pair(basis_[u][a], cuv, basis_[v][b], cvu) / kLn2;
            }
        }
    }

    // One centring run at fixed t. Returns false on iteration exhaustion.
    bool centre(double& s, bool phase1, double t, const std::function<bool(double)>& early_stop) {
        const int n = dim(phase1);
        double prev_decrement = std::numeric_limits<double>::infinity();
        double anchor = std::numeric_limits<double>::infinity();
        int since_halving = 0;
        for (;;) {
            if (++newton_steps_ > kMaxNewton) return false;
            CMatrix l[2];
            for (int u = 0; u < 2; ++u)
                if (active_[u]) l[u] = Eigen::LLT<CMatrix>(d_[u]).matrixL();

            Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
            Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
            Eigen::VectorXd tg;
            Eigen::MatrixXd th;

            if (phase1) {
                g(nvar_) -= t;
            } else if (objective_term_) {
                term_derivatives(*objective_term_, l, tg, th);
                g.head(nvar_) -= t * tg;
                hess.topLeftCorner(nvar_, nvar_) -= t * th;
            }

            for (const auto& r : rows_) {
                const double w = term_bits(ch_, r.term, d_) - r.bound - (phase1 ? s : 0.0);
                term_derivatives(r.term, l, tg, th);
                Eigen::VectorXd gw = Eigen::VectorXd::Zero(n);
                gw.head(nvar_) = tg;
                if (phase1) gw(nvar_) = -1.0;
                g -= gw / w;
                hess.topLeftCorner(nvar_, nvar_) -= th / w;
                hess += gw * gw.transpose() / (w * w);
            }

            for (int u = 0; u < 2; ++u) {
                if (!active_[u]) continue;
                const CMatrix a = l[u].adjoint() * l[u];
                const double q = budget_[u] - d_[u].trace().real();
                Eigen::VectorXd gt = Eigen::VectorXd::Zero(n);
                for (std::size_t k = 0; k < basis_[u].size(); ++k) {
                    const int idx = offset_[u] + static_cast<int>(k);
                    gt(idx) = trace_with(basis_[u][k], a);
                    // -log det(I + Y) at Y = 0.
                    const BasisElem& e = basis_[u][k];
                    g(idx) -= e.count == 1 ? 1.0 : 0.0;
                    hess(idx, idx) += e.count == 1 ? 1.0 : 2.0;
                    if (!phase1 && !objective_term_) g(idx) += t * gt(idx);
                }
                g += gt / q;
                hess += gt * gt.transpose() / (q * q);
            }

            hess = 0.5 * (hess + hess.transpose());
            // The exact Hessian is positive definite; when rounding breaks
            // that at large t, shift the diagonal until Cholesky succeeds.
            Eigen::LLT<Eigen::MatrixXd> llt(hess);
            const double diag_scale = hess.diagonal().cwiseAbs().maxCoeff();
            for (double shift = 1e-15 * diag_scale; llt.info() != Eigen::Success && shift <= 1e-3 * diag_scale;
                 shift *= 10.0) {
                llt.compute(hess + shift * Eigen::MatrixXd::Identity(n, n));
            }
            if (llt.info() != Eigen::Success) return false;
            const Eigen::VectorXd step = llt.solve(-g);
            const double decrement = -g.dot(step);
            if (!(decrement >= 0.0) || !std::isfinite(decrement)) return false;
            if (decrement * 0.5 <= kNewtonTol) return true;
            // Below 1e-6 the decrement must keep falling quadratically; a
            // stall means it has hit the rounding floor.
            if (decrement < 1e-6 && decrement > 0.5 * prev_decrement) return true;
            prev_decrement = decrement;
            // Damped steps that no longer halve the decrement: the Hessian
            // is conditioned past double precision.
            if (decrement <= 0.5 * anchor) {
                anchor = decrement;
                since_halving = 0;
            } else if (decrement < 1e-2 && ++since_halving >= 30) {
                return true;
            }

            const double phi0 = phi(d_, s, phase1, t);
            CMatrix delta[2];
            for (int u = 0; u < 2; ++u)
                if (active_[u]) delta[u] = hermitian_part(l[u] * combine(basis_[u], step.data() + offset_[u], n_[u]) *
                                                          l[u].adjoint());
            const double ds = phase1 ? step(nvar_) : 0.0;

            // Inside the quadratic region a full step is taken whenever it
            // stays in the domain; phi differences there are below rounding.
            if (decrement < 0.25) {
                CMatrix trial[2];
                for (int u = 0; u < 2; ++u) trial[u] = active_[u] ? CMatrix(d_[u] + delta[u]) : d_[u];
                if (std::isfinite(phi(trial, s + ds, phase1, t))) {
                    for (int u = 0; u < 2; ++u) d_[u] = trial[u];
                    s += ds;
                    if (early_stop && early_stop(s)) return true;
                    continue;
                }
            }
            double alpha = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
                CMatrix trial[2];
                for (int u = 0; u < 2; ++u) trial[u] = active_[u] ? CMatrix(d_[u] + alpha * delta[u]) : d_[u];
                const double sv = s + alpha * ds;
                const double val = phi(trial, sv, phase1, t);
                if (std::isfinite(val) && val <= phi0 - 0.25 * alpha * decrement) {
                    for (int u = 0; u < 2; ++u) d_[u] = trial[u];
                    s = sv;
                    moved = true;
                    break;
                }
            }
            if (!moved) return true;  // no further progress in floating point
            if (early_stop && early_stop(s)) return true;
        }
    }

    double min_row_slack() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& r : rows_) m = std::min(m, term_bits(ch_, r.term, d_) - r.bound);
        return m;
    }

    // Max-slack program. Returns the best slack found (positive once a
    // strictly feasible point exists).
    double phase_one() {
        double start = min_row_slack();
        if (start > 0.0) return start;
        double s = start - 1.0;
        double t = 1.0;
        const int m = barrier_weight();
        auto stop = [&](double) { return min_row_slack() > 0.0; };
        for (;;) {
            if (!centre(s, true, t, stop)) {
                status_ = SolveStatus::MaxIters;
                return min_row_slack();
            }
            const double cur = min_row_slack();
            if (cur > 0.0) return cur;
            if (m / t <= 1e-11) return cur;
            // Bound on the optimal slack: sufficient to certify early.
            if (cur + m / t < -kInfeasibleSlack) return cur + m / t;
            t *= kStepGrowth;
        }
    }

    double centre_path() {
        const int m = barrier_weight();
        double t = 1.0;
        double s = 0.0;
        for (;;) {
            if (!centre(s, false, t, {})) {
                status_ = SolveStatus::MaxIters;
                return t;
            }
            const double obj = objective_value(d_);
            if (m / t <= tol_ * std::max(1.0, std::abs(obj))) {
                status_ = SolveStatus::Optimal;
                return t;
            }
            t *= kStepGrowth;
        }
    }

    void finish_report(CvxSolution& out, double t) {
        for (int u = 0; u < 2; ++u) d_[u] = hermitian_part(d_[u]);
        out.d = {d_[0], d_[1]};
        out.objective_value = objective_value(d_);
        out.newton_steps = newton_steps_;
        out.bound_relaxation = shift_;
        out.constraint_slacks.clear();
        for (const auto& rc : prog_.constraints) out.constraint_slacks.push_back(term_bits(ch_, term_of(rc.kind), d_) - rc.bound);
        out.rate_duals.assign(prog_.constraints.size(), 0.0);
        out.psd_dual1 = CMatrix::Zero(n_[0], n_[0]);
        out.psd_dual2 = CMatrix::Zero(n_[1], n_[1]);
        t_final_ = t;
        if (t > 0.0) {
            for (const auto& r : rows_) {
                const double w = term_bits(ch_, r.term, d_) - r.bound;
                out.rate_duals[r.index] = 1.0 / (t * w);
            }
            for (int u = 0; u < 2; ++u) {
                if (!active_[u]) continue;
                const double q = budget_[u] - d_[u].trace().real();
                (u == 0 ? out.budget_dual1 : out.budget_dual2) = 1.0 / (t * q);
                const CMatrix z = hermitian_part(d_[u].inverse()) / t;
                (u == 0 ? out.psd_dual1 : out.psd_dual2) = z;
            }
        }
        if (t > 0.0 && out.status == SolveStatus::Optimal) refine_duals(out);
        out.kkt_residual = out.status == SolveStatus::Optimal ? kkt_residual(ch_, prog_, out)
                                                               : std::numeric_limits<double>::infinity();
    }

    // Near-active multipliers are re-fitted by nonnegative least squares on
    // the scaled stationarity condition; 1/(t w) loses all precision once the
    // slack w approaches rounding level.
    void refine_duals(CvxSolution& out) const {
        constexpr double kNearActive = 1e-6;
        struct Unknown {
            int row = -1;  // index into rows_, or -1 for a budget
            int user = 0;
        };
        std::vector<Unknown> unk;
        for (std::size_t r = 0; r < rows_.size(); ++r)
            if (term_bits(ch_, rows_[r].term, d_) - rows_[r].bound < kNearActive) unk.push_back({static_cast<int>(r), 0});
        for (int u = 0; u < 2; ++u)
            if (active_[u] && budget_[u] - d_[u].trace().real() < kNearActive * std::max(1.0, budget_[u]))
                unk.push_back({-1, u});
        if (unk.empty()) return;

        CMatrix root[2];
        int len = 0;
        int start[2] = {0, 0};
        for (int u = 0; u < 2; ++u) {
            if (!active_[u]) continue;
            root[u] = recover_precoder(d_[u]);
            start[u] = len;
            len += 2 * n_[u] * n_[u];
        }
        auto pack = [&](int u, const CMatrix& m, Eigen::VectorXd& into) {
            const CMatrix sm = root[u] * m * root[u];
            int k = start[u];
            for (Eigen::Index e = 0; e < sm.size(); ++e) {
                into(k++) += sm(e).real();
                into(k++) += sm(e).imag();
            }
        };

        // Residual = c + A x with everything outside x held at its barrier value.
        Eigen::VectorXd c = Eigen::VectorXd::Zero(len);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(len, static_cast<int>(unk.size()));
        std::vector<bool> free_row(rows_.size(), false);
        bool free_budget[2] = {false, false};
        for (const auto& x : unk) {
            if (x.row >= 0) {
                free_row[static_cast<std::size_t>(x.row)] = true;
            } else {
                free_budget[x.user] = true;
            }
        }
        for (int u = 0; u < 2; ++u) {
            if (!active_[u]) continue;
            CMatrix base = -hermitian_part(d_[u].inverse()) / t_final_;
            if (!objective_term_) {
                base += CMatrix::Identity(n_[u], n_[u]);
            } else if (objective_term_->uses[u]) {
                base -= term_gradient(ch_, *objective_term_, d_, u);
            }
            for (std::size_t r = 0; r < rows_.size(); ++r)
                if (!free_row[r] && rows_[r].term.uses[u])
                    base -= out.rate_duals[rows_[r].index] * term_gradient(ch_, rows_[r].term, d_, u);
            if (!free_budget[u]) base += (u == 0 ? out.budget_dual1 : out.budget_dual2) * CMatrix::Identity(n_[u], n_[u]);
            Eigen::VectorXd cu = Eigen::VectorXd::Zero(len);
            pack(u, base, cu);
            c += cu;
            for (std::size_t k = 0; k < unk.size(); ++k) {
                Eigen::VectorXd col = Eigen::VectorXd::Zero(len);
                if (unk[k].row >= 0) {
                    const Row& r = rows_[static_cast<std::size_t>(unk[k].row)];
                    if (!r.term.uses[u]) continue;
                    pack(u, -term_gradient(ch_, r.term, d_, u), col);
                } else {
                    if (unk[k].user != u) continue;
                    pack(u, CMatrix::Identity(n_[u], n_[u]), col);
                }
                a.col(static_cast<int>(k)) += col;
            }
        }

        // Active-set NNLS: drop negative components until none remain.
        std::vector<bool> keep(unk.size(), true);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<int>(unk.size()));
        for (std::size_t pass = 0; pass <= unk.size(); ++pass) {
            std::vector<int> cols;
            for (std::size_t k = 0; k < unk.size(); ++k)
                if (keep[k]) cols.push_back(static_cast<int>(k));
            x.setZero();
            if (cols.empty()) break;
            Eigen::MatrixXd sub(len, static_cast<int>(cols.size()));
            for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<int>(k)) = a.col(cols[k]);
            const Eigen::VectorXd sol = sub.colPivHouseholderQr().solve(-c);
            bool negative = false;
            for (std::size_t k = 0; k < cols.size(); ++k) {
                x(cols[k]) = sol(static_cast<int>(k));
                if (sol(static_cast<int>(k)) < 0.0) {
                    keep[static_cast<std::size_t>(cols[k])] = false;
                    negative = true;
                }
            }
            if (!negative) break;
        }
        for (int k = 0; k < x.size(); ++k) x(k) = std::max(0.0, x(k));

        // Keep the refit only when it improves the stationarity residual.
        Eigen::VectorXd old = Eigen::VectorXd::Zero(static_cast<int>(unk.size()));
        for (std::size_t k = 0; k < unk.size(); ++k)
            old(static_cast<int>(k)) = unk[k].row >= 0 ? out.rate_duals[rows_[static_cast<std::size_t>(unk[k].row)].index]
                                                       : (unk[k].user == 0 ? out.budget_dual1 : out.budget_dual2);
        if ((c + a * x).norm() >= (c + a * old).norm()) return;
        for (std::size_t k = 0; k < unk.size(); ++k) {
            const double v = x(static_cast<int>(k));
            if (unk[k].row >= 0) {
                out.rate_duals[rows_[static_cast<std::size_t>(unk[k].row)].index] = v;
            } else {
                (unk[k].user == 0 ? out.budget_dual1 : out.budget_dual2) = v;
            }
        }
    }

    const ChannelSet& ch_;
    const LogDetProgram& prog_;
    double t_final_ = 0.0;
    double tol_;
    int n_[2] = {0, 0};
    double budget_[2] = {0.0, 0.0};
    bool active_[2] = {false, false};
    CMatrix d_[2];
    std::vector<BasisElem> basis_[2];
    int offset_[2] = {0, 0};
    int nvar_ = 0;
    std::optional<Term> objective_term_;
    std::vector<Row> rows_;
    double shift_ = 0.0;
    int newton_steps_ = 0;
    SolveStatus status_ = SolveStatus::Optimal;
};

}  // namespace

void LogDetProgram::validate(const ChannelSet& ch) const {
    ch.validate();
    if (!(p1max >= 0.0) || !(p2max >= 0.0) || !std::isfinite(p1max) || !std::isfinite(p2max)) {
        throw InvalidProgram("budgets must be finite and >= 0");
    }
    bool seen[3] = {false, false, false};
    for (const auto& c : constraints) {
        const int k = static_cast<int>(c.kind);
        if (seen[k]) throw InvalidProgram("at most one constraint per rate kind");
        seen[k] = true;
        if (!std::isfinite(c.bound) || c.bound < 0.0) throw InvalidProgram("rate bound must be finite and >= 0");
        if (c.sense == Sense::Equal && objective != Objective::MinTotalTrace) {
            throw InvalidProgram("equality rate constraints require a trace-minimisation objective");
        }
        if (auto ok = objective_kind(objective); ok && *ok == c.kind && c.sense == Sense::Equal) {
            throw InvalidProgram("objective rate duplicated as an equality constraint");
        }
    }
    for (int u = 0; u < 2; ++u) {
        const Source s = static_cast<Source>(u + 1);
        if (const auto& f = fixed(s)) {
            if (f->rows() != ch.n(s) || f->cols() != ch.n(s)) throw InvalidProgram("fixed block has the wrong size");
            require_psd(*f, "fixed block");
            if (f->trace().real() > budget(s) + 1e-9) throw InvalidProgram("fixed block exceeds its budget");
        }
    }
}

CvxSolution solve(const ChannelSet& ch, const LogDetProgram& prog, double tol) {
    if (!(tol > 0.0)) throw InvalidProgram("tolerance must be > 0");
    prog.validate(ch);
    BarrierSolver solver(ch, prog, tol);
    return solver.run();
}

double kkt_residual(const ChannelSet& ch, const LogDetProgram& prog, const CvxSolution& sol) {
    const CMatrix d[2] = {sol.d.d1, sol.d.d2};
    double obj = 0.0;
    const auto okind = objective_kind(prog.objective);
    if (okind) {
        obj = term_bits(ch, term_of(*okind), d);
    } else {
        obj = sol.d.total_trace();
    }
    const double scale = std::max(1.0, std::abs(obj));

    double residual = 0.0;
    double gap = 0.0;
    for (std::size_t c = 0; c < prog.constraints.size(); ++c) {
        const auto& rc = prog.constraints[c];
        const double slack = term_bits(ch, term_of(rc.kind), d) - rc.bound + sol.bound_relaxation;
        const double nu = c < sol.rate_duals.size() ? sol.rate_duals[c] : 0.0;
        if (nu < 0.0) residual = std::max(residual, -nu);
        residual = std::max(residual, -slack);
        if (rc.bound > 0.0) gap += nu * std::max(0.0, slack);
    }

    for (int u = 0; u < 2; ++u) {
        const Source s = static_cast<Source>(u + 1);
        if (prog.fixed(s) || prog.budget(s) <= 0.0) continue;
        const CMatrix& du = d[u];
        const double eta = u == 0 ? sol.budget_dual1 : sol.budget_dual2;
        const CMatrix& z = u == 0 ? sol.psd_dual1 : sol.psd_dual2;
        const double q = prog.budget(s) - du.trace().real();
        residual = std::max(residual, -q);
        residual = std::max(residual, -eta);
        residual = std::max(residual, -min_eigenvalue(z));
        gap += eta * std::max(0.0, q) + std::max(0.0, (z * du).trace().real());

        // Lagrangian gradient, then scaled by D^(1/2) on both sides.
        const int n = ch.n(s);
        CMatrix lag = CMatrix::Zero(n, n);
        if (!okind) {
            lag += CMatrix::Identity(n, n);
        } else if (term_of(*okind).uses[u]) {
            lag -= term_gradient(ch, term_of(*okind), d, u);
        }
        for (std::size_t c = 0; c < prog.constraints.size(); ++c) {
            const Term t = term_of(prog.constraints[c].kind);
            const double nu = c < sol.rate_duals.size() ? sol.rate_duals[c] : 0.0;
            if (t.uses[u] && nu != 0.0) lag -= nu * term_gradient(ch, t, d, u);
        }
        lag += eta * CMatrix::Identity(n, n) - z;
        const CMatrix root = recover_precoder(hermitian_part(du));
        residual = std::max(residual, (root * lag * root).norm());
    }
    residual = std::max(residual, gap / scale);
    return residual;
}

Whitened whitened_channel(const ChannelSet& ch, Source u, const CMatrix& other) {
    const Source v = twr::other(u);
    const CMatrix& hu = ch.uplink(u);
    const CMatrix& hv = ch.uplink(v);
    const int nr = ch.nr();
    CMatrix q = CMatrix::Identity(nr, nr) + hv * other * hv.adjoint() / ch.sigma2_r;
    Eigen::LLT<CMatrix> llt(hermitian_part(q));
    const CMatrix g = hermitian_part(hu.adjoint() * llt.solve(hu)) / ch.sigma2_r;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
    const int n = static_cast<int>(g.rows());
    Whitened w;
    w.basis.resize(n, n);
    std::vector<double> vals;
    const double top = std::max(0.0, es.eigenvalues()(n - 1));
    for (int k = 0; k < n; ++k) {
        const int src = n - 1 - k;
        w.basis.col(k) = es.eigenvectors().col(src);
        const double e = es.eigenvalues()(src);
        if (top > 0.0 && e > 1e-12 * top) vals.push_back(e);
    }
    w.gains = GainVector(std::move(vals));
    return w;
}

namespace {

CMatrix covariance_from(const Whitened& w, const std::vector<double>& powers) {
    const int n = static_cast<int>(w.basis.rows());
    RVector p = RVector::Zero(n);
    for (std::size_t k = 0; k < powers.size(); ++k) p(static_cast<int>(k)) = powers[k];
    return hermitian_part(w.basis * p.asDiagonal() * w.basis.adjoint());
}

}  // namespace

CMatrix best_response(const ChannelSet& ch, Source u, const CMatrix& other, double budget) {
    const Whitened w = whitened_channel(ch, u, other);
    return covariance_from(w, waterfill(w.gains, std::max(0.0, budget)).powers);
}

CMatrix min_power_for_rate(const ChannelSet& ch, Source u, const CMatrix& other, double rate) {
    const int n = ch.n(u);
    if (rate <= 0.0) return CMatrix::Zero(n, n);
    const Whitened w = whitened_channel(ch, u, other);
    const double level = level_for_rate(w.gains, rate);
    std::vector<double> p;
    for (double g : w.gains.values()) p.push_back(std::max(0.0, level - 1.0 / g));
    return covariance_from(w, p);
}

CvxSolution mac_capacity(const ChannelSet& ch, double p1max, double p2max, double tol) {
    ch.validate();
    if (!(p1max >= 0.0) || !(p2max >= 0.0)) throw InvalidProgram("budgets must be >= 0");
    const double budget[2] = {p1max, p2max};
    CMatrix d[2] = {CMatrix::Zero(ch.n(Source::One), ch.n(Source::One)),
                    CMatrix::Zero(ch.n(Source::Two), ch.n(Source::Two))};
    const Term mac = term_of(RateKind::MacSum);

    CvxSolution out;
    double gap = std::numeric_limits<double>::infinity();
    double lam[2] = {0.0, 0.0};
    constexpr int kMaxSweeps = 20000;
    int sweep = 0;
    for (; sweep <= kMaxSweeps; ++sweep) {
        // Frank-Wolfe gap bounds the distance to the sum capacity.
        gap = 0.0;
        for (int u = 0; u < 2; ++u) {
            if (budget[u] <= 0.0) continue;
            const CMatrix g = term_gradient(ch, mac, d, u);
            Eigen::SelfAdjointEigenSolver<CMatrix> es(g, Eigen::EigenvaluesOnly);
            lam[u] = std::max(0.0, es.eigenvalues().maxCoeff());
            gap += budget[u] * lam[u] - (g * d[u]).trace().real();
        }
        if (gap <= tol) break;
        if (sweep == kMaxSweeps) break;

        // Jacobi update averaged with the previous iterate; symmetric
        // instances stay symmetric.
        CMatrix next[2];
        for (int u = 0; u < 2; ++u) {
            const Source s = static_cast<Source>(u + 1);
            next[u] = budget[u] > 0.0 ? best_response(ch, s, d[1 - u], budget[u]) : d[u];
        }
        const bool single = budget[0] <= 0.0 || budget[1] <= 0.0;
        for (int u = 0; u < 2; ++u) d[u] = single ? next[u] : CMatrix(0.5 * (d[u] + next[u]));
    }

    out.d = {d[0], d[1]};
    out.objective_value = term_bits(ch, mac, d);
    out.kkt_residual = std::max(0.0, gap);
    out.status = gap <= tol ? SolveStatus::Optimal : SolveStatus::MaxIters;
    out.budget_dual1 = lam[0];
    out.budget_dual2 = lam[1];
    out.newton_steps = sweep;
    out.phase1_slack = std::numeric_limits<double>::infinity();
    return out;
}

FeasibilityResult feasible(const ChannelSet& ch, const std::vector<RateConstraint>& constraints, double p1max,
                           double p2max, std::size_t binding, double tol) {
    if (binding >= constraints.size()) throw InvalidProgram("binding constraint index out of range");
    LogDetProgram prog;
    prog.p1max = p1max;
    prog.p2max = p2max;
    const RateConstraint& key = constraints[binding];
    switch (key.kind) {
        case RateKind::MacSum: prog.objective = Objective::MaxMacSum; break;
        case RateKind::Uplink1: prog.objective = Objective::MaxUplink1; break;
        case RateKind::Uplink2: prog.objective = Objective::MaxUplink2; break;
    }
    for (std::size_t c = 0; c < constraints.size(); ++c)
        if (c != binding) prog.constraints.push_back(constraints[c]);

    FeasibilityResult res;
    res.required = key.bound;
    if (key.bound <= 0.0 && prog.constraints.empty()) {
        res.feasible = true;
        res.value = 0.0;
        res.witness = CovPair::zeros(ch.n(Source::One), ch.n(Source::Two));
        res.status = SolveStatus::Optimal;
        return res;
    }
    const CvxSolution sol = solve(ch, prog, tol);
    res.status = sol.status;
    res.witness = sol.d;
    if (sol.status == SolveStatus::Infeasible) {
        res.feasible = false;
        res.value = sol.phase1_slack;
        return res;
    }
    res.value = sol.objective_value;
    res.feasible = res.value >= key.bound - 10.0 * tol * std::max(1.0, key.bound);
    return res;
}

}  // namespace twr
