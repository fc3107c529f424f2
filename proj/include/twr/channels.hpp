#pragma once

#include "twr/types.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace twr {

// The four link matrices of a two-way relay plus receiver noise powers.
//   h1r, h2r : source -> relay, shape nr x ni
//   hr1, hr2 : relay -> source, shape ni x nr
struct ChannelSet {
    CMatrix h1r, h2r, hr1, hr2;
    double sigma2_r = 1.0;
    double sigma2_1 = 1.0;
    double sigma2_2 = 1.0;

    int n(Source s) const { return static_cast<int>(uplink(s).cols()); }
    int nr() const { return static_cast<int>(h1r.rows()); }

    const CMatrix& uplink(Source s) const { return s == Source::One ? h1r : h2r; }
    const CMatrix& downlink(Source s) const { return s == Source::One ? hr1 : hr2; }
    double noise(Source s) const { return s == Source::One ? sigma2_1 : sigma2_2; }

    bool is_scalar() const { return nr() == 1 && n(Source::One) == 1 && n(Source::Two) == 1; }

    // Throws InvalidInput on inconsistent shapes or non-positive noise.
    void validate() const;
};

struct ChannelSpec {
    int n1 = 1;
    int n2 = 1;
    int nr = 1;
    double v1 = 1.0;  // per-part variance of H_1r entries
    double v2 = 1.0;  // per-part variance of H_2r entries
    bool reciprocal = false;
    // Draw H_2r := H_1r and H_r2 := H_r1 (requires n1 == n2).
    bool identical_sources = false;
    double sigma2_r = 1.0;
    double sigma2_1 = 1.0;
    double sigma2_2 = 1.0;
    std::uint64_t seed = 0;
};

// Entries of H_ir have i.i.d. N(0, v_i) real and imaginary parts. Downlinks use
// unit per-part variance, or are the plain transposes of the uplinks when
// reciprocal. Equal seeds give bit-identical draws.
ChannelSet generate_channels(const ChannelSpec& spec);

// Descending, strictly positive eigen-gains alpha(k) = |omega(k)|^2 / sigma^2.
class GainVector {
public:
    GainVector() = default;
    // Throws InvalidInput unless values are positive and sorted descending.
    explicit GainVector(std::vector<double> descending);

    static GainVector from_unsorted(std::vector<double> values);
    // Merge of two gain sets, still sorted.
    static GainVector concat(const GainVector& a, const GainVector& b);

    std::span<const double> values() const { return gains_; }
    int rank() const { return static_cast<int>(gains_.size()); }
    bool empty() const { return gains_.empty(); }
    double operator[](int k) const { return gains_[static_cast<std::size_t>(k)]; }
    double largest() const { return gains_.front(); }

private:
    std::vector<double> gains_;
};

// SVD of a downlink H_ri = U diag(omega) V^H with full V (nr x nr).
struct SVDCache {
    CMatrix u;
    RVector singular;  // min(ni, nr) values, descending
    CMatrix v;

    CMatrix reconstruct() const;
};

// Singular values below 1e-10 * max are treated as zero.
inline constexpr double kRankTolerance = 1e-10;

std::pair<GainVector, SVDCache> bc_gains(const ChannelSet& ch, Source i);

// B = V diag((inv_level - 1/alpha(k))+, ..., 0) V^H.
CMatrix relay_covariance(const SVDCache& svd, const GainVector& gains, double inv_level);

// Eigen square root W = V diag(sqrt(e)) V^H so that W W^H = C.
CMatrix recover_precoder(const CMatrix& c);

// Shared helpers for Hermitian PSD inputs.
bool is_hermitian(const CMatrix& a, double tol);
double min_eigenvalue(const CMatrix& a);
// Throws InvalidInput when `a` is not square Hermitian PSD within tolerance.
void require_psd(const CMatrix& a, const char* what);

}  // namespace twr
