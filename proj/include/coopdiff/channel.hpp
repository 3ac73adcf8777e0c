#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "coopdiff/rng.hpp"

namespace coopdiff::channel {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

// Flat-fading gain of one point-to-point link.
struct ChannelCoefficient {
    Complex value{1.0, 0.0};

    double magnitude() const { return std::abs(value); }
    double power() const { return std::norm(value); }
};

// Additive complex noise, described by its total per-symbol variance.
// Each real component carries variance / 2.
struct NoiseSpec {
    double variance = 0.0;
};

bool all_finite(const ComplexVector& v);
bool all_finite(std::span<const double> v);

// Circularly-symmetric complex Gaussian gain with E[|h|^2] = scale^2,
// so |h| is Rayleigh distributed.
ChannelCoefficient sample_rayleigh(RandomStream& rng, double scale);

// n i.i.d. circularly-symmetric complex Gaussian samples of total
// variance spec.variance each.
ComplexVector sample_awgn(RandomStream& rng, std::size_t n, NoiseSpec spec);

// Elementwise h * x + noise.
ComplexVector apply_link(const ComplexVector& x, ChannelCoefficient h,
                         const ComplexVector& noise);

// Two real feature values per complex symbol (re, im). Exact inverse pair;
// the feature length must be even.
ComplexVector pack_features(std::span<const double> features);
std::vector<double> unpack_features(const ComplexVector& symbols);

// Total complex-noise variance realizing snr_db at the given per-symbol
// signal power: variance = signal_power / 10^(snr_db / 10).
double noise_variance_for_snr_db(double snr_db, double signal_power = 1.0);

}  // namespace coopdiff::channel
