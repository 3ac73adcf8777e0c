#include "coopdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "coopdiff/channel.hpp"

namespace coopdiff::diffusion {

namespace {

void check_timestep(const DiffusionSchedule& schedule, std::size_t t) {
    if (t < 1 || t > schedule.num_steps()) {
        throw std::invalid_argument("DiffusionSchedule: timestep out of range");
    }
}

}  // namespace

double DiffusionSchedule::beta_at(std::size_t t) const {
    check_timestep(*this, t);
    return beta[t - 1];
}

double DiffusionSchedule::alpha_at(std::size_t t) const {
    check_timestep(*this, t);
    return alpha[t - 1];
}

double DiffusionSchedule::alpha_bar_at(std::size_t t) const {
    check_timestep(*this, t);
    return alpha_bar[t - 1];
}

DiffusionSchedule build_linear_schedule(std::size_t num_steps, double beta_start,
                                        double beta_end) {
    if (num_steps < 2) {
        throw std::invalid_argument("build_linear_schedule: need at least 2 steps");
    }
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw std::invalid_argument("build_linear_schedule: need 0 < beta_start <= beta_end < 1");
    }
    DiffusionSchedule s;
    s.beta.resize(num_steps);
    s.alpha.resize(num_steps);
    s.alpha_bar.resize(num_steps);
    double running = 1.0;
    for (std::size_t i = 0; i < num_steps; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(num_steps - 1);
        s.beta[i] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[i] = 1.0 - s.beta[i];
        running *= s.alpha[i];
        s.alpha_bar[i] = running;
    }
    return s;
}

DiffusionState forward_diffuse(const std::vector<double>& x0, std::size_t t,
                               const std::vector<double>& eps,
                               const DiffusionSchedule& schedule) {
    if (x0.size() != eps.size()) {
        throw std::invalid_argument("forward_diffuse: x0/eps length mismatch");
    }
    const double abar = schedule.alpha_bar_at(t);
    const double signal = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    DiffusionState state;
    state.t = t;
    state.x.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        state.x[i] = signal * x0[i] + noise * eps[i];
    }
    return state;
}

TimestepMatch match_channel_timestep(double effective_variance,
                                     const DiffusionSchedule& schedule) {
    if (effective_variance < 0.0) {
        throw std::invalid_argument("match_channel_timestep: variance must be >= 0");
    }
    const double target = 1.0 / (1.0 + effective_variance);
    TimestepMatch match;
    double best = std::abs(schedule.alpha_bar_at(1) - target);
    match.t_ch = 1;
    for (std::size_t t = 2; t <= schedule.num_steps(); ++t) {
        const double d = std::abs(schedule.alpha_bar_at(t) - target);
        if (d < best) {
            best = d;
            match.t_ch = t;
        }
    }
    match.alpha_bar = schedule.alpha_bar_at(match.t_ch);
    match.scale = std::sqrt(match.alpha_bar);
    match.saturated = target < schedule.alpha_bar_at(schedule.num_steps());
    return match;
}

DiffusionState reverse_step(const DiffusionState& state,
                            const std::vector<double>& eps_hat,
                            const DiffusionSchedule& schedule, RandomStream* rng) {
    if (state.t < 1) {
        throw std::invalid_argument("reverse_step: state already at t = 0");
    }
    if (state.x.size() != eps_hat.size()) {
        throw std::invalid_argument("reverse_step: state/eps length mismatch");
    }
    const std::size_t t = state.t;
    const double alpha = schedule.alpha_at(t);
    const double abar = schedule.alpha_bar_at(t);
    const double eps_coeff = (1.0 - alpha) / std::sqrt(1.0 - abar);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);

    DiffusionState next;
    next.t = t - 1;
    next.x.resize(state.x.size());
    for (std::size_t i = 0; i < state.x.size(); ++i) {
        next.x[i] = inv_sqrt_alpha * (state.x[i] - eps_coeff * eps_hat[i]);
    }
    if (t > 1 && rng != nullptr) {
        std::normal_distribution<double> z(0.0, std::sqrt(schedule.beta_at(t)));
        for (auto& v : next.x) v += z(*rng);
    }
    return next;
}

ReconstructionResult reconstruct_features(const std::vector<double>& x_hat,
                                          double noise_variance,
                                          const EpsilonPredictor& denoiser,
                                          const std::vector<double>& condition,
                                          const DiffusionSchedule& schedule,
                                          RandomStream& rng, ReverseMode mode) {
    ReconstructionResult result;
    result.match = match_channel_timestep(noise_variance, schedule);

    DiffusionState state;
    state.t = result.match.t_ch;
    state.x.resize(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
        state.x[i] = result.match.scale * x_hat[i];
    }
    RandomStream* z_stream = mode == ReverseMode::Ancestral ? &rng : nullptr;
    while (state.t >= 1) {
        const std::vector<double> eps_hat = denoiser.predict(state.x, state.t, condition);
        state = reverse_step(state, eps_hat, schedule, z_stream);
    }
    result.x0_hat = std::move(state.x);
    return result;
}

ReconstructionResult sample_from_channel_state(const protocol::AggregatedObservation& obs,
                                               const EpsilonPredictor& denoiser,
                                               const std::vector<double>& condition,
                                               const DiffusionSchedule& schedule,
                                               RandomStream& rng, ReverseMode mode) {
    const std::vector<double> features = channel::unpack_features(obs.x_hat);
    return reconstruct_features(features, obs.effective_variance / 2.0, denoiser,
                                condition, schedule, rng, mode);
}

}  // namespace coopdiff::diffusion
