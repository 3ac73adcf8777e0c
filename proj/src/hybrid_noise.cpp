#include "coopdiff/hybrid_noise.hpp"

#include <cmath>
#include <stdexcept>

#include "coopdiff/channel.hpp"

namespace coopdiff::hybrid {

double lambda_at(std::size_t t, const LambdaSchedule& schedule) {
    if (t < 1 || t > schedule.num_steps) {
        throw std::invalid_argument("lambda_at: timestep out of range");
    }
    if (schedule.lambda0 < 0.0 || schedule.lambda0 > 1.0) {
        throw std::invalid_argument("lambda_at: lambda0 must be in [0, 1]");
    }
    return schedule.lambda0 *
           (1.0 - static_cast<double>(t) / static_cast<double>(schedule.num_steps));
}

NormalizedChannelNoise normalize_channel_noise(const protocol::CooperativeLinkSet& links,
                                               RandomStream& rng, std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("normalize_channel_noise: n must be >= 1");
    }
    const double variance = protocol::effective_noise_variance(links);
    if (variance == 0.0) {
        return NormalizedChannelNoise{std::vector<double>(n, 0.0), true};
    }
    const std::size_t num_symbols = (n + 1) / 2;
    const channel::ComplexVector zero_frame(num_symbols, channel::Complex{0.0, 0.0});
    const protocol::AggregatedObservation obs = protocol::transmit(zero_frame, links, rng);

    std::vector<double> noise = channel::unpack_features(obs.x_hat);
    noise.resize(n);
    const double inv_std = 1.0 / std::sqrt(variance / 2.0);
    for (auto& v : noise) v *= inv_std;
    return NormalizedChannelNoise{std::move(noise), false};
}

std::vector<double> mix_noise(const std::vector<double>& eps_ch,
                              const std::vector<double>& eps_df, double lambda_t) {
    if (eps_ch.size() != eps_df.size()) {
        throw std::invalid_argument("mix_noise: input length mismatch");
    }
    if (lambda_t < 0.0 || lambda_t > 1.0) {
        throw std::invalid_argument("mix_noise: lambda must be in [0, 1]");
    }
    if (lambda_t == 0.0) return eps_df;
    if (lambda_t == 1.0) return eps_ch;
    const double df_coeff = std::sqrt(1.0 - lambda_t * lambda_t);
    std::vector<double> mixed(eps_ch.size());
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        mixed[i] = lambda_t * eps_ch[i] + df_coeff * eps_df[i];
    }
    return mixed;
}

}  // namespace coopdiff::hybrid
