#include <algorithm>
#include <cmath>

#include "coopdiff/channel.hpp"
#include "coopdiff/denoiser.hpp"
#include "coopdiff/diffusion.hpp"
#include "coopdiff/harness.hpp"
#include "coopdiff/hybrid_noise.hpp"
#include "coopdiff/metrics.hpp"
#include "coopdiff/protocol.hpp"

namespace coopdiff::harness {

namespace {

CheckRecord check(const std::string& name, double measured, double expected, double tolerance) {
    CheckRecord r;
    r.name = name;
    r.measured = measured;
    r.expected = expected;
    r.tolerance = tolerance;
    r.pass = std::isfinite(measured) && std::abs(measured - expected) <= tolerance;
    return r;
}

double max_gradient_error(std::uint64_t seed) {
    const diffusion::DiffusionSchedule schedule = diffusion::build_linear_schedule(50, 0.01, 0.2);
    denoise::MlpDenoiserParams params = denoise::init_mlp_params(6, 1, 8, seed, 8);
    RandomStream rng = derive_stream(seed, 0x4752u);
    std::normal_distribution<double> gaussian(0.0, 1.0);
    std::vector<denoise::TrainingSample> batch(3);
    std::uniform_int_distribution<std::size_t> uniform_t(1, schedule.num_steps());
    for (auto& s : batch) {
        s.x0.resize(6);
        s.eps.resize(6);
        for (auto& v : s.x0) v = gaussian(rng);
        for (auto& v : s.eps) v = gaussian(rng);
        s.t = uniform_t(rng);
        s.z = denoise::SemanticEmbedding{{1.0}};
    }
    std::vector<double> grad;
    denoise::loss_and_gradient(batch, params, schedule, grad);

    std::vector<double> flat = params.flatten();
    double worst = 0.0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(flat[i]));
        const double saved = flat[i];
        flat[i] = saved + h;
        params.unflatten(flat);
        const double up = denoise::loss_conditional(batch, params, schedule);
        flat[i] = saved - h;
        params.unflatten(flat);
        const double down = denoise::loss_conditional(batch, params, schedule);
        flat[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double rel = std::abs(numeric - grad[i]) /
                           std::max(1e-8, std::abs(numeric) + std::abs(grad[i]));
        worst = std::max(worst, rel);
    }
    params.unflatten(flat);
    return worst;
}

}  // namespace

std::vector<CheckRecord> run_selftest(std::uint64_t seed) {
    std::vector<CheckRecord> checks;

    {  // Rayleigh sampling moments.
        RandomStream rng = derive_stream(seed, 0x5261u);
        constexpr std::size_t kDraws = 200000;
        double second = 0.0;
        std::size_t below_median = 0;
        const double median = std::log(2.0);
        for (std::size_t i = 0; i < kDraws; ++i) {
            const double p = channel::sample_rayleigh(rng, 1.0).power();
            second += p;
            if (p <= median) ++below_median;
        }
        checks.push_back(check("rayleigh_second_moment", second / kDraws, 1.0, 0.01));
        checks.push_back(check("rayleigh_median_prob",
                               static_cast<double>(below_median) / kDraws, 0.5, 0.005));
    }
    {  // AWGN moments.
        RandomStream rng = derive_stream(seed, 0x4177u);
        const channel::ComplexVector noise =
            channel::sample_awgn(rng, 200000, channel::NoiseSpec{2.0});
        double second = 0.0;
        double magnitude = 0.0;
        for (const auto& s : noise) {
            second += std::norm(s);
            magnitude += std::abs(s);
        }
        const double n = static_cast<double>(noise.size());
        checks.push_back(check("awgn_variance", second / n, 2.0, 0.02));
        // E|n| = sqrt(pi/4 * variance).
        checks.push_back(check("awgn_mean_magnitude", magnitude / n,
                               std::sqrt(M_PI / 4.0 * 2.0), 0.006));
    }
    {  // Aggregation variance, closed form and Monte Carlo.
        protocol::CooperativeLinkSet unit;
        unit.direct = protocol::ChannelCoefficient{{1.0, 0.0}};
        unit.bs_noise = channel::NoiseSpec{1.0};
        unit.relays.push_back({1,
                               protocol::ChannelCoefficient{{1.0, 0.0}},
                               protocol::ChannelCoefficient{{1.0, 0.0}},
                               channel::NoiseSpec{1.0}});
        checks.push_back(check("effective_variance_formula",
                               protocol::effective_noise_variance(unit), 0.75, 1e-12));

        RandomStream rng = derive_stream(seed, 0x4556u);
        double worst_rel = 0.0;
        for (std::size_t relays : {0ul, 1ul, 4ul}) {
            protocol::LinkModel model;
            model.num_relays = relays;
            model.bs_noise_variance = 1.0;
            model.relay_noise_variance = 1.0;
            const protocol::CooperativeLinkSet links = model.sample(rng);
            const double predicted = protocol::effective_noise_variance(links);
            const channel::ComplexVector frame(100000, channel::Complex{0.0, 0.0});
            const protocol::AggregatedObservation obs = protocol::transmit(frame, links, rng);
            double measured = 0.0;
            for (const auto& s : obs.x_hat) measured += std::norm(s);
            measured /= static_cast<double>(obs.x_hat.size());
            worst_rel = std::max(worst_rel, std::abs(measured - predicted) / predicted);
        }
        checks.push_back(check("effective_variance_monte_carlo", worst_rel, 0.0, 0.02));

        const channel::ComplexVector x(20000, channel::Complex{1.0, 0.0});
        RandomStream rng2 = derive_stream(seed, 0x4557u);
        const std::vector<channel::ComplexVector> copies = {
            channel::apply_link(x, protocol::ChannelCoefficient{},
                                channel::sample_awgn(rng2, x.size(), {1.0})),
            channel::apply_link(x, protocol::ChannelCoefficient{},
                                channel::sample_awgn(rng2, x.size(), {1.0}))};
        checks.push_back(check("aggregate_two_copy_estimate",
                               protocol::aggregate(copies).effective_variance, 0.5, 0.02));
    }
    {  // Timestep matching against an independent scan.
        const diffusion::DiffusionSchedule schedule =
            diffusion::build_linear_schedule(1000, 1e-4, 0.02);
        std::size_t violations = 0;
        for (double variance : {0.01, 0.1, 0.5, 1.0, 4.0}) {
            const diffusion::TimestepMatch match =
                diffusion::match_channel_timestep(variance, schedule);
            const double target = 1.0 / (1.0 + variance);
            for (std::size_t t = 1; t <= schedule.num_steps(); ++t) {
                if (std::abs(schedule.alpha_bar_at(t) - target) <
                    std::abs(match.alpha_bar - target)) {
                    ++violations;
                }
            }
        }
        checks.push_back(check("timestep_match_scan_violations",
                               static_cast<double>(violations), 0.0, 0.0));
        checks.push_back(check("alpha_bar_final", schedule.alpha_bar_at(1000), 0.0, 1e-4));
    }
    {  // Forward / reverse worked examples.
        const diffusion::DiffusionSchedule schedule = diffusion::build_linear_schedule(2, 0.1, 0.2);
        const diffusion::DiffusionState forward =
            diffusion::forward_diffuse({1.0}, 2, {1.0}, schedule);
        checks.push_back(check("forward_diffuse_example", forward.x[0],
                               std::sqrt(0.72) + std::sqrt(0.28), 1e-9));
        // Hand-built table hitting alpha = 0.9 with alpha_bar = 0.72.
        const diffusion::DiffusionSchedule table{{0.2, 0.1}, {0.8, 0.9}, {0.8, 0.72}};
        const diffusion::DiffusionState reverse =
            diffusion::reverse_step({{forward.x[0]}, 2}, {1.0}, table, nullptr);
        checks.push_back(check("reverse_step_example", reverse.x[0], 1.2530, 1e-3));
    }
    {  // Hybrid noise statistics.
        RandomStream rng = derive_stream(seed, 0x4859u);
        std::normal_distribution<double> gaussian(0.0, 1.0);
        constexpr std::size_t kComponents = 1000000;
        std::vector<double> eps_ch(kComponents), eps_df(kComponents);
        for (auto& v : eps_ch) v = gaussian(rng);
        for (auto& v : eps_df) v = gaussian(rng);
        const std::vector<double> mixed = hybrid::mix_noise(eps_ch, eps_df, 0.6);
        double mean = 0.0, second = 0.0;
        for (double v : mixed) {
            mean += v;
            second += v * v;
        }
        mean /= kComponents;
        second /= kComponents;
        checks.push_back(check("hybrid_mix_mean", mean, 0.0, 0.01));
        checks.push_back(check("hybrid_mix_variance", second - mean * mean, 1.0, 0.01));
        checks.push_back(check("lambda_terminal",
                               hybrid::lambda_at(1000, hybrid::LambdaSchedule{0.8, 1000}), 0.0,
                               0.0));
    }
    checks.push_back(check("gradient_check_max_rel_error", max_gradient_error(seed), 0.0, 1e-4));
    {  // Oracle beats naive predictors on a single Gaussian.
        const diffusion::DiffusionSchedule schedule =
            diffusion::build_linear_schedule(1000, 1e-4, 0.02);
        const denoise::GaussianMixtureSource source =
            denoise::make_separated_mixture(1, 8, 0.0, 1.0);
        const std::size_t t = diffusion::match_channel_timestep(1.0, schedule).t_ch;
        RandomStream rng = derive_stream(seed, 0x4F52u);
        std::normal_distribution<double> gaussian(0.0, 1.0);
        double oracle_mse = 0.0, zero_mse = 0.0, identity_mse = 0.0;
        constexpr std::size_t kDraws = 20000;
        for (std::size_t i = 0; i < kDraws; ++i) {
            const std::vector<double> x0 = source.sample(rng);
            std::vector<double> eps(x0.size());
            for (auto& e : eps) e = gaussian(rng);
            const diffusion::DiffusionState state =
                diffusion::forward_diffuse(x0, t, eps, schedule);
            const std::vector<double> predicted = denoise::analytic_epsilon(
                state.x, t, denoise::SemanticEmbedding{{1.0}}, source, schedule);
            for (std::size_t k = 0; k < eps.size(); ++k) {
                oracle_mse += (eps[k] - predicted[k]) * (eps[k] - predicted[k]);
                zero_mse += eps[k] * eps[k];
                identity_mse += (eps[k] - state.x[k]) * (eps[k] - state.x[k]);
            }
        }
        const double ratio = oracle_mse / std::min(zero_mse, identity_mse);
        checks.push_back(check("oracle_vs_naive_ratio", ratio, 0.85, 0.10));
    }
    {  // Metric spot values.
        metrics::ImageTensor a{1, 1, 2, {0.0, 0.0}};
        metrics::ImageTensor b{1, 1, 2, {1.0, 3.0}};
        checks.push_back(check("mse_example", metrics::mse(a, b), 5.0, 1e-12));
        metrics::ImageTensor u{1, 8, 8, std::vector<double>(64, 100.0)};
        metrics::ImageTensor v{1, 8, 8, std::vector<double>(64, 100.0)};
        v.values[9] = 140.0;
        const double err = metrics::mse(u, v);
        checks.push_back(check("psnr_example",
                               metrics::psnr(u, v, 255.0) -
                                   (10.0 * std::log10(255.0 * 255.0 / err)),
                               0.0, 1e-12));
        checks.push_back(check("psnr_mse1_max255", 10.0 * std::log10(255.0 * 255.0), 48.1308,
                               1e-3));
        RandomStream rng = derive_stream(seed, 0x4D53u);
        std::normal_distribution<double> gaussian(0.0, 1.0);
        metrics::ImageTensor img{1, 32, 32, std::vector<double>(1024)};
        for (auto& p : img.values) p = std::clamp(0.5 + 0.2 * gaussian(rng), 0.0, 1.0);
        checks.push_back(check("msssim_identity",
                               metrics::ms_ssim(img, img,
                                                metrics::MsSsimConfig::auto_for(32, 32, 1.0)),
                               1.0, 1e-12));
    }
    return checks;
}

}  // namespace coopdiff::harness
