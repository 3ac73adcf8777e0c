#include "coopdiff/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace coopdiff::channel {

bool all_finite(const ComplexVector& v) {
    for (const auto& s : v) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return false;
    }
    return true;
}

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

ChannelCoefficient sample_rayleigh(RandomStream& rng, double scale) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("sample_rayleigh: scale must be > 0");
    }
    std::normal_distribution<double> component(0.0, scale / std::sqrt(2.0));
    const double re = component(rng);
    const double im = component(rng);
    return ChannelCoefficient{Complex{re, im}};
}

ComplexVector sample_awgn(RandomStream& rng, std::size_t n, NoiseSpec spec) {
    if (n == 0) {
        throw std::invalid_argument("sample_awgn: n must be >= 1");
    }
    if (spec.variance < 0.0) {
        throw std::invalid_argument("sample_awgn: variance must be >= 0");
    }
    ComplexVector out(n, Complex{0.0, 0.0});
    if (spec.variance == 0.0) return out;
    std::normal_distribution<double> component(0.0, std::sqrt(spec.variance / 2.0));
    for (auto& s : out) {
        const double re = component(rng);
        const double im = component(rng);
        s = Complex{re, im};
    }
    return out;
}

ComplexVector apply_link(const ComplexVector& x, ChannelCoefficient h,
                         const ComplexVector& noise) {
    if (x.size() != noise.size()) {
        throw std::invalid_argument("apply_link: signal/noise length mismatch");
    }
    ComplexVector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = h.value * x[i] + noise[i];
    }
    return y;
}

ComplexVector pack_features(std::span<const double> features) {
    if (features.size() % 2 != 0) {
        throw std::invalid_argument("pack_features: feature length must be even");
    }
    ComplexVector symbols(features.size() / 2);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        symbols[i] = Complex{features[2 * i], features[2 * i + 1]};
    }
    return symbols;
}

std::vector<double> unpack_features(const ComplexVector& symbols) {
    std::vector<double> features(2 * symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        features[2 * i] = symbols[i].real();
        features[2 * i + 1] = symbols[i].imag();
    }
    return features;
}

double noise_variance_for_snr_db(double snr_db, double signal_power) {
    if (!(signal_power > 0.0)) {
        throw std::invalid_argument("noise_variance_for_snr_db: signal power must be > 0");
    }
    return signal_power / std::pow(10.0, snr_db / 10.0);
}

}  // namespace coopdiff::channel
