#pragma once

#include "twr/channels.hpp"
#include "twr/rng.hpp"

#include <cmath>

namespace twr::test {

// Real scalar links with unit noise unless overridden.
inline ChannelSet scalar_channels(double h1r, double h2r, double hr1, double hr2, double noise = 1.0) {
    ChannelSet ch;
    ch.h1r = CMatrix::Constant(1, 1, h1r);
    ch.h2r = CMatrix::Constant(1, 1, h2r);
    ch.hr1 = CMatrix::Constant(1, 1, hr1);
    ch.hr2 = CMatrix::Constant(1, 1, hr2);
    ch.sigma2_r = ch.sigma2_1 = ch.sigma2_2 = noise;
    return ch;
}

inline CMatrix random_psd(CounterRng& rng, int n, double scale = 1.0) {
    CMatrix a(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = Complex(rng.next_normal(), rng.next_normal());
    return scale * a * a.adjoint() / static_cast<double>(n);
}

inline ChannelSet random_channels(std::uint64_t seed, int n1, int n2, int nr) {
    ChannelSpec spec;
    spec.n1 = n1;
    spec.n2 = n2;
    spec.nr = nr;
    spec.seed = seed;
    return generate_channels(spec);
}

inline GainVector random_gains(CounterRng& rng, int max_modes) {
    const int r = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_modes));
    std::vector<double> g;
    for (int k = 0; k < r; ++k) g.push_back(std::exp(3.0 * (rng.next_open01() - 0.5) * 2.0));
    return GainVector::from_unsorted(g);
}

}  // namespace twr::test
