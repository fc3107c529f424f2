#include "twr/channels.hpp"

#include "twr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace twr {

namespace {

// Each matrix has its own substream so its draw does not depend on the
// shapes of the others.
CMatrix gaussian_matrix(std::uint64_t seed, std::uint64_t stream, int rows, int cols, double variance) {
    CounterRng rng(mix_seed(seed, stream));
    const double scale = std::sqrt(variance);
    CMatrix m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            const double re = rng.next_normal();
            const double im = rng.next_normal();
            m(r, c) = Complex(scale * re, scale * im);
        }
    }
    return m;
}

void check_shape(const CMatrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw InvalidInput(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                           ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

}  // namespace

void ChannelSet::validate() const {
    const auto nrelay = h1r.rows();
    if (nrelay < 1 || h1r.cols() < 1 || h2r.cols() < 1) throw InvalidInput("channel dimensions must be >= 1");
    check_shape(h2r, nrelay, h2r.cols(), "H_2r");
    check_shape(hr1, h1r.cols(), nrelay, "H_r1");
    check_shape(hr2, h2r.cols(), nrelay, "H_r2");
    if (!(sigma2_r > 0.0) || !(sigma2_1 > 0.0) || !(sigma2_2 > 0.0)) {
        throw InvalidInput("noise powers must be strictly positive");
    }
}

ChannelSet generate_channels(const ChannelSpec& spec) {
    if (spec.n1 < 1 || spec.n2 < 1 || spec.nr < 1) throw InvalidSpec("antenna counts must be >= 1");
    if (!(spec.v1 > 0.0) || !(spec.v2 > 0.0)) throw InvalidSpec("channel variances must be > 0");
    if (!(spec.sigma2_r > 0.0) || !(spec.sigma2_1 > 0.0) || !(spec.sigma2_2 > 0.0)) {
        throw InvalidSpec("noise powers must be > 0");
    }
    if (spec.identical_sources && spec.n1 != spec.n2) {
        throw InvalidSpec("identical_sources requires n1 == n2");
    }

    ChannelSet ch;
    ch.sigma2_r = spec.sigma2_r;
    ch.sigma2_1 = spec.sigma2_1;
    ch.sigma2_2 = spec.sigma2_2;

    ch.h1r = gaussian_matrix(spec.seed, 0, spec.nr, spec.n1, spec.v1);
    ch.h2r = spec.identical_sources ? ch.h1r : gaussian_matrix(spec.seed, 1, spec.nr, spec.n2, spec.v2);
    if (spec.reciprocal) {
        ch.hr1 = ch.h1r.transpose();
        ch.hr2 = ch.h2r.transpose();
    } else {
        ch.hr1 = gaussian_matrix(spec.seed, 2, spec.n1, spec.nr, 1.0);
        ch.hr2 = spec.identical_sources ? ch.hr1 : gaussian_matrix(spec.seed, 3, spec.n2, spec.nr, 1.0);
    }
    return ch;
}

GainVector::GainVector(std::vector<double> descending) : gains_(std::move(descending)) {
    for (std::size_t k = 0; k < gains_.size(); ++k) {
        if (!(gains_[k] > 0.0) || !std::isfinite(gains_[k])) throw InvalidInput("gains must be finite and > 0");
        if (k > 0 && gains_[k] > gains_[k - 1]) throw InvalidInput("gains must be sorted descending");
    }
}

GainVector GainVector::from_unsorted(std::vector<double> values) {
    std::sort(values.begin(), values.end(), std::greater<>());
    return GainVector(std::move(values));
}

GainVector GainVector::concat(const GainVector& a, const GainVector& b) {
    std::vector<double> merged;
    merged.reserve(a.gains_.size() + b.gains_.size());
    std::merge(a.gains_.begin(), a.gains_.end(), b.gains_.begin(), b.gains_.end(), std::back_inserter(merged),
               std::greater<>());
    return GainVector(std::move(merged));
}

CMatrix SVDCache::reconstruct() const {
    const auto rows = u.rows();
    const auto cols = v.rows();
    CMatrix omega = CMatrix::Zero(rows, cols);
    for (Eigen::Index k = 0; k < singular.size(); ++k) omega(k, k) = singular(k);
    return u * omega * v.adjoint();
}

std::pair<GainVector, SVDCache> bc_gains(const ChannelSet& ch, Source i) {
    const CMatrix& h = ch.downlink(i);
    Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);

    SVDCache cache{svd.matrixU(), svd.singularValues(), svd.matrixV()};

    std::vector<double> gains;
    const double top = cache.singular.size() > 0 ? cache.singular(0) : 0.0;
    for (Eigen::Index k = 0; k < cache.singular.size(); ++k) {
        const double w = cache.singular(k);
        if (top > 0.0 && w >= kRankTolerance * top) gains.push_back(w * w / ch.noise(i));
    }
    return {GainVector::from_unsorted(std::move(gains)), std::move(cache)};
}

CMatrix relay_covariance(const SVDCache& svd, const GainVector& gains, double inv_level) {
    if (inv_level < 0.0) throw InvalidInput("inverse water-level must be >= 0");
    const auto nr = svd.v.rows();
    RVector p = RVector::Zero(nr);
    for (int k = 0; k < gains.rank(); ++k) p(k) = std::max(0.0, inv_level - 1.0 / gains[k]);
    return svd.v * p.asDiagonal() * svd.v.adjoint();
}

bool is_hermitian(const CMatrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

double min_eigenvalue(const CMatrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

void require_psd(const CMatrix& a, const char* what) {
    if (a.size() == 0) return;
    if (!is_hermitian(a, 1e-10)) throw InvalidInput(std::string(what) + " is not Hermitian");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if (min_eigenvalue(a) < -1e-9 * scale) throw InvalidInput(std::string(what) + " is not positive semidefinite");
}

CMatrix recover_precoder(const CMatrix& c) {
    require_psd(c, "covariance");
    if (c.size() == 0) return c;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (c + c.adjoint()));
    RVector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace twr
