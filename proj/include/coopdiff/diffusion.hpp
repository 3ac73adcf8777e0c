#pragma once

#include <cstddef>
#include <vector>

#include "coopdiff/protocol.hpp"
#include "coopdiff/rng.hpp"

namespace coopdiff::diffusion {

// Noising schedule tables. Timesteps are 1-based: beta_at(1) is the first
// step, beta_at(num_steps()) the last.
struct DiffusionSchedule {
    std::vector<double> beta;
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // running product of alpha

    std::size_t num_steps() const { return beta.size(); }
    double beta_at(std::size_t t) const;
    double alpha_at(std::size_t t) const;
    double alpha_bar_at(std::size_t t) const;
};

DiffusionSchedule build_linear_schedule(std::size_t num_steps, double beta_start,
                                        double beta_end);

struct DiffusionState {
    std::vector<double> x;
    std::size_t t = 0;  // 1-based; 0 only as the output of the final reverse step
};

// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps
DiffusionState forward_diffuse(const std::vector<double>& x0, std::size_t t,
                               const std::vector<double>& eps,
                               const DiffusionSchedule& schedule);

struct TimestepMatch {
    std::size_t t_ch = 1;
    double scale = 1.0;  // sqrt of the matched alpha_bar
    double alpha_bar = 1.0;
    bool saturated = false;  // noise exceeds what the chain can represent
};

// Picks t minimizing |alpha_bar_t - 1/(1 + noise_variance)|. Scaling the
// observation by `scale` then matches both the signal coefficient and the
// noise variance of the forward marginal at t_ch.
TimestepMatch match_channel_timestep(double effective_variance,
                                     const DiffusionSchedule& schedule);

// One ancestral step:
//   x_{t-1} = (x_t - (1-alpha_t)/sqrt(1-alpha_bar_t) * eps_hat) / sqrt(alpha_t)
//             + sqrt(beta_t) * z
// z is standard normal; it is omitted at t = 1 and whenever rng is null.
DiffusionState reverse_step(const DiffusionState& state,
                            const std::vector<double>& eps_hat,
                            const DiffusionSchedule& schedule, RandomStream* rng);

// Conditional noise predictor consumed by the reverse sampler. Implementations
// must be pure so frozen predictors can serve concurrent sampling runs.
class EpsilonPredictor {
public:
    virtual ~EpsilonPredictor() = default;
    virtual std::vector<double> predict(const std::vector<double>& x_t, std::size_t t,
                                        const std::vector<double>& condition) const = 0;
};

// Mean follows the zero-injected-noise trajectory; Ancestral draws the
// sqrt(beta_t) * z term at every step above t = 1.
enum class ReverseMode { Mean, Ancestral };

struct ReconstructionResult {
    std::vector<double> x0_hat;
    TimestepMatch match;
};

// Starts the reverse chain from a channel observation given in the predictor's
// feature domain: scales by sqrt(alpha_bar_{t_ch}) and iterates down to t = 1.
// noise_variance is the per-component variance of the observation residual.
ReconstructionResult reconstruct_features(const std::vector<double>& x_hat,
                                          double noise_variance,
                                          const EpsilonPredictor& denoiser,
                                          const std::vector<double>& condition,
                                          const DiffusionSchedule& schedule,
                                          RandomStream& rng,
                                          ReverseMode mode = ReverseMode::Mean);

// Convenience for unit-power feature pipelines: unpacks the aggregate to the
// real domain, where the per-component residual variance is effective/2.
ReconstructionResult sample_from_channel_state(const protocol::AggregatedObservation& obs,
                                               const EpsilonPredictor& denoiser,
                                               const std::vector<double>& condition,
                                               const DiffusionSchedule& schedule,
                                               RandomStream& rng,
                                               ReverseMode mode = ReverseMode::Mean);

}  // namespace coopdiff::diffusion
