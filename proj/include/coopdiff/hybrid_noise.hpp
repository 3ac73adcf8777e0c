#pragma once

#include <cstddef>
#include <vector>

#include "coopdiff/protocol.hpp"
#include "coopdiff/rng.hpp"

namespace coopdiff::hybrid {

// Linearly decaying mixing weight: lambda_t = lambda0 * (1 - t / T).
struct LambdaSchedule {
    double lambda0 = 0.8;
    std::size_t num_steps = 1000;
};

double lambda_at(std::size_t t, const LambdaSchedule& schedule);

// Everything needed to synthesize training noise: the decay schedule plus a
// sampler of channel realizations.
struct HybridNoiseSpec {
    LambdaSchedule lambda_schedule;
    protocol::LinkModel channel_source;
};

struct NormalizedChannelNoise {
    std::vector<double> values;
    bool degenerate = false;  // zero effective variance, nothing to normalize
};

// Simulates one aggregated-noise realization (a zero frame through the slot),
// unpacks it, and scales each real component to unit variance. n is the
// length of the returned real vector.
NormalizedChannelNoise normalize_channel_noise(const protocol::CooperativeLinkSet& links,
                                               RandomStream& rng, std::size_t n);

// lambda * eps_ch + sqrt(1 - lambda^2) * eps_df; variance-preserving for
// independent unit-variance inputs, and bitwise equal to one input at the
// lambda = 0 / 1 boundaries.
std::vector<double> mix_noise(const std::vector<double>& eps_ch,
                              const std::vector<double>& eps_df, double lambda_t);

}  // namespace coopdiff::hybrid
