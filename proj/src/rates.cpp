#include "twr/waterfill.hpp"

#include <cmath>
#include <numbers>

namespace twr {

double log2det_hpd(const CMatrix& a) {
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success) throw InvalidInput("log-det argument is not positive definite");
    double s = 0.0;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index k = 0; k < a.rows(); ++k) s += std::log(l(k, k).real());
    return 2.0 * s / std::numbers::ln2;
}

double uplink_rate(const ChannelSet& ch, const CMatrix& d, Source i) {
    require_psd(d, "source covariance");
    const CMatrix& h = ch.uplink(i);
    if (d.rows() != h.cols()) throw InvalidInput("source covariance size does not match channel");
    const auto nr = h.rows();
    CMatrix m = CMatrix::Identity(nr, nr) + h * d * h.adjoint() / ch.sigma2_r;
    return std::max(0.0, log2det_hpd(m));
}

double mac_rate(const ChannelSet& ch, const CovPair& d) {
    require_psd(d.d1, "D1");
    require_psd(d.d2, "D2");
    if (d.d1.rows() != ch.h1r.cols() || d.d2.rows() != ch.h2r.cols()) {
        throw InvalidInput("source covariance size does not match channel");
    }
    const auto nr = ch.nr();
    CMatrix m = CMatrix::Identity(nr, nr) +
                (ch.h1r * d.d1 * ch.h1r.adjoint() + ch.h2r * d.d2 * ch.h2r.adjoint()) / ch.sigma2_r;
    return std::max(0.0, log2det_hpd(m));
}

DownlinkGains DownlinkGains::of(const ChannelSet& ch) {
    DownlinkGains g;
    g.alpha1 = bc_gains(ch, Source::One).first;
    g.alpha2 = bc_gains(ch, Source::Two).first;
    g.both = GainVector::concat(g.alpha1, g.alpha2);
    return g;
}

WaterLevels relative_levels(const ChannelSet& ch, const DownlinkGains& g, const CovPair& d) {
    WaterLevels w;
    w.inv_mu1 = level_for_rate(g.alpha2, uplink_rate(ch, d.d1, Source::One));
    w.inv_mu2 = level_for_rate(g.alpha1, uplink_rate(ch, d.d2, Source::Two));
    w.inv_mu_ma = level_for_rate(g.both, mac_rate(ch, d));
    return w;
}

WaterLevels relative_levels(const ChannelSet& ch, const CovPair& d) {
    return relative_levels(ch, DownlinkGains::of(ch), d);
}

}  // namespace twr
