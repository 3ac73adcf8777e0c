#include "coopdiff/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ctime>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "coopdiff/channel.hpp"

namespace coopdiff::harness {

namespace {

enum StreamRole : std::uint64_t {
    kRoleSource = 1,
    kRoleChannel = 2,
    kRoleNoise = 3,
    kRoleRecon = 4,
    kRoleSetting = 5,
    kRoleFrameStats = 6,
};

std::uint64_t point_key(double snr_db, std::size_t num_users) {
    return derive_seed(0x706F696E74ULL, std::bit_cast<std::uint64_t>(snr_db), num_users);
}

protocol::LinkModel point_link_model(const ExperimentConfig& cfg, double snr_db,
                                     std::size_t num_users, bool cooperation) {
    protocol::LinkModel model;
    model.num_relays = 0;
    if (cooperation && num_users >= 2) {
        // User 0 is the active source of the slot; the rest overhear.
        const protocol::TdmaSchedule slot =
            protocol::make_slot_schedule(num_users, 0, cfg.coop_subset);
        model.num_relays = slot.num_relays();
    }
    model.fading = cfg.fading;
    model.rayleigh_scale = 1.0;
    // Features are normalized to unit per-component power, so each complex
    // symbol carries power 2.
    const double sigma_c2 = channel::noise_variance_for_snr_db(snr_db, 2.0);
    model.bs_noise_variance = sigma_c2;
    model.relay_noise_variance = sigma_c2;
    model.h_floor = cfg.h_floor;
    return model;
}

struct Stats {
    double mean = 0.0;
    double stddev = 0.0;
};

template <typename Extract>
Stats compute_stats(const std::vector<TrialOutcome>& outcomes, Extract extract) {
    Stats s;
    const double n = static_cast<double>(outcomes.size());
    for (const auto& o : outcomes) s.mean += extract(o);
    s.mean /= n;
    if (outcomes.size() > 1) {
        double acc = 0.0;
        for (const auto& o : outcomes) {
            const double d = extract(o) - s.mean;
            acc += d * d;
        }
        s.stddev = std::sqrt(acc / (n - 1.0));
    }
    return s;
}

PointRecord summarize(double snr_db, std::size_t num_users, bool cooperation,
                      const std::vector<TrialOutcome>& outcomes) {
    PointRecord r;
    r.snr_db = snr_db;
    r.num_users = num_users;
    r.cooperation = cooperation;
    r.trials = outcomes.size();
    const Stats psnr = compute_stats(outcomes, [](const TrialOutcome& o) { return o.psnr; });
    const Stats ssim = compute_stats(outcomes, [](const TrialOutcome& o) { return o.msssim; });
    const Stats err = compute_stats(outcomes, [](const TrialOutcome& o) { return o.mse; });
    r.mean_psnr = psnr.mean;
    r.std_psnr = psnr.stddev;
    r.mean_msssim = ssim.mean;
    r.std_msssim = ssim.stddev;
    r.mean_mse = err.mean;
    r.std_mse = err.stddev;
    r.mean_effective_variance =
        compute_stats(outcomes, [](const TrialOutcome& o) { return o.effective_variance; }).mean;
    r.mean_t_ch = compute_stats(outcomes, [](const TrialOutcome& o) { return o.t_ch; }).mean;
    return r;
}

double setting_match_variance(const ResolvedExperiment& exp, double snr_db,
                              std::size_t num_users, bool cooperation) {
    const protocol::LinkModel model =
        point_link_model(exp.config, snr_db, num_users, cooperation);
    RandomStream rng =
        derive_stream(exp.config.seed, point_key(snr_db, num_users), kRoleSetting);
    constexpr std::size_t kRealizations = 512;
    double total = 0.0;
    for (std::size_t i = 0; i < kRealizations; ++i) {
        total += protocol::effective_noise_variance(model.sample(rng));
    }
    const double mean_complex = total / static_cast<double>(kRealizations);
    return mean_complex / 2.0 * exp.source_power;
}

}  // namespace

Provenance make_provenance(const ExperimentConfig& cfg) {
    Provenance p;
    p.seed = cfg.seed;
    p.code_version = kCodeVersion;
    if (cfg.embed_timestamp) {
        const std::time_t now = std::time(nullptr);
        char buf[32] = {0};
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
        p.timestamp = buf;
    }
    return p;
}

void ExperimentConfig::validate() const {
    if (num_users == 0) throw std::invalid_argument("config: num_users must be >= 1");
    if (snr_db_list.empty()) throw std::invalid_argument("config: snr_db_list is empty");
    if (trials == 0) throw std::invalid_argument("config: trials must be >= 1");
    if (workers == 0) throw std::invalid_argument("config: workers must be >= 1");
    if (!(h_floor > 0.0)) throw std::invalid_argument("config: h_floor must be > 0");
    if (lambda0 < 0.0 || lambda0 > 1.0) {
        throw std::invalid_argument("config: lambda0 must be in [0, 1]");
    }
    if (schedule_steps < 2) throw std::invalid_argument("config: schedule_steps must be >= 2");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw std::invalid_argument("config: need 0 < beta_start <= beta_end < 1");
    }
    if (source == SourceKind::GaussianMixture) {
        if (feature_dim == 0 || feature_dim % 2 != 0) {
            throw std::invalid_argument("config: feature_dim must be positive and even");
        }
        if (mixture_components == 0) {
            throw std::invalid_argument("config: mixture_components must be >= 1");
        }
        if (sigma0_sq < 0.0) throw std::invalid_argument("config: sigma0_sq must be >= 0");
    } else {
        if (frame_size < 8 || frame_size % 2 != 0) {
            throw std::invalid_argument("config: frame_size must be even and >= 8");
        }
        if (!(frame_smoothing > 0.0)) {
            throw std::invalid_argument("config: frame_smoothing must be > 0");
        }
    }
    if (denoiser == DenoiserKind::Trained && checkpoint.empty()) {
        throw std::invalid_argument("config: trained denoiser needs a checkpoint path");
    }
    if (train_steps == 0 || batch_size == 0 || hidden_dim == 0) {
        throw std::invalid_argument("config: training counts must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("config: learning_rate must be > 0");
    }
}

TextureFrameSource::TextureFrameSource(std::size_t size, double smoothing_sigma)
    : size_(size), sigma_(smoothing_sigma) {
    if (size_ < 8 || size_ % 2 != 0) {
        throw std::invalid_argument("TextureFrameSource: size must be even and >= 8");
    }
    const long half = std::max(1L, std::lround(std::ceil(3.0 * sigma_)));
    kernel_.resize(static_cast<std::size_t>(2 * half + 1));
    double total = 0.0;
    for (long k = -half; k <= half; ++k) {
        const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma_ * sigma_));
        kernel_[static_cast<std::size_t>(k + half)] = v;
        total += v;
    }
    for (auto& v : kernel_) v /= total;
    // Separably smoothed unit white noise has per-pixel variance (sum k^2)^2,
    // so its standard deviation is the squared-tap sum itself.
    double k2 = 0.0;
    for (double v : kernel_) k2 += v * v;
    field_rms_ = k2;
}

std::vector<double> TextureFrameSource::sample(RandomStream& rng) const {
    const std::size_t n = size_;
    std::vector<double> field(n * n);
    std::normal_distribution<double> gaussian(0.0, 1.0);
    for (auto& v : field) v = gaussian(rng);

    const long half = static_cast<long>(kernel_.size()) / 2;
    auto mirror = [&](long i) {
        const long limit = static_cast<long>(n);
        while (i < 0 || i >= limit) {
            if (i < 0) i = -i - 1;
            if (i >= limit) i = 2 * limit - 1 - i;
        }
        return static_cast<std::size_t>(i);
    };
    std::vector<double> tmp(n * n), smooth(n * n);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            double acc = 0.0;
            for (long k = -half; k <= half; ++k) {
                acc += kernel_[static_cast<std::size_t>(k + half)] *
                       field[y * n + mirror(static_cast<long>(x) + k)];
            }
            tmp[y * n + x] = acc;
        }
    }
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            double acc = 0.0;
            for (long k = -half; k <= half; ++k) {
                acc += kernel_[static_cast<std::size_t>(k + half)] *
                       tmp[mirror(static_cast<long>(y) + k) * n + x];
            }
            smooth[y * n + x] = acc;
        }
    }
    for (auto& v : smooth) {
        v = std::clamp(0.5 + 0.25 * v / field_rms_, 0.0, 1.0);
    }
    return smooth;
}

ResolvedExperiment resolve_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ResolvedExperiment exp;
    exp.config = cfg;
    exp.schedule = diffusion::build_linear_schedule(cfg.schedule_steps, cfg.beta_start,
                                                    cfg.beta_end);
    if (cfg.source == SourceKind::GaussianMixture) {
        denoise::GaussianMixtureSource mixture = denoise::make_separated_mixture(
            cfg.mixture_components, cfg.feature_dim, cfg.mixture_separation, cfg.sigma0_sq);
        exp.model = mixture;
        exp.source_power = mixture.per_component_power();
        exp.source = std::make_unique<denoise::MixtureFeatureSource>(std::move(mixture));
    } else {
        auto frames = std::make_unique<TextureFrameSource>(cfg.frame_size, cfg.frame_smoothing);
        // Fit the single-Gaussian stand-in from a deterministic pilot batch.
        RandomStream rng = derive_stream(cfg.seed, kRoleFrameStats);
        constexpr std::size_t kPilotFrames = 256;
        double mean = 0.0, second = 0.0;
        for (std::size_t i = 0; i < kPilotFrames; ++i) {
            const std::vector<double> frame = frames->sample(rng);
            for (double v : frame) {
                mean += v;
                second += v * v;
            }
        }
        const double count = static_cast<double>(kPilotFrames * frames->dim());
        mean /= count;
        second /= count;
        denoise::GaussianMixtureSource::Component comp;
        comp.mean.assign(frames->dim(), mean);
        comp.weight = 1.0;
        exp.model.components = {comp};
        exp.model.sigma0_sq = std::max(1e-12, second - mean * mean);
        exp.source_power = second;
        exp.source = std::move(frames);
    }
    if (!(exp.source_power > 0.0)) {
        throw std::invalid_argument("config: source has zero power, cannot normalize");
    }

    if (cfg.denoiser == DenoiserKind::Analytic) {
        exp.predictor = std::make_unique<denoise::AnalyticDenoiser>(exp.model, exp.schedule);
    } else {
        const denoise::Checkpoint ckpt = [&] {
            try {
                return denoise::load_checkpoint(cfg.checkpoint);
            } catch (const std::runtime_error& e) {
                throw std::invalid_argument(std::string("config: ") + e.what());
            }
        }();
        if (ckpt.params.feature_dim != exp.source->dim() ||
            ckpt.params.cond_dim != exp.source->embedding_dim()) {
            throw std::invalid_argument("config: checkpoint shapes do not match the source");
        }
        if (ckpt.schedule_steps != cfg.schedule_steps || ckpt.beta_start != cfg.beta_start ||
            ckpt.beta_end != cfg.beta_end) {
            throw std::invalid_argument("config: checkpoint was trained on a different schedule");
        }
        exp.predictor = std::make_unique<denoise::MlpDenoiser>(ckpt.params);
    }
    return exp;
}

TrialOutcome run_trial(const ResolvedExperiment& exp, double snr_db, std::size_t num_users,
                       bool cooperation, std::size_t trial_index) {
    return run_trial_with_setting(exp, snr_db, num_users, cooperation, trial_index, -1.0);
}

TrialOutcome run_trial_with_setting(const ResolvedExperiment& exp, double snr_db,
                                    std::size_t num_users, bool cooperation,
                                    std::size_t trial_index, double setting_variance) {
    const ExperimentConfig& cfg = exp.config;
    const std::uint64_t pk = point_key(snr_db, num_users);
    const double gain = 1.0 / std::sqrt(exp.source_power);

    RandomStream rng_src = derive_stream(cfg.seed, pk, trial_index, kRoleSource);
    const std::vector<double> x0 = exp.source->sample(rng_src);
    std::vector<double> x_norm(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) x_norm[i] = gain * x0[i];

    const channel::ComplexVector symbols = channel::pack_features(x_norm);
    const protocol::LinkModel model = point_link_model(cfg, snr_db, num_users, cooperation);
    RandomStream rng_ch = derive_stream(cfg.seed, pk, trial_index, kRoleChannel);
    const protocol::CooperativeLinkSet links = model.sample(rng_ch);
    RandomStream rng_noise = derive_stream(cfg.seed, pk, trial_index, kRoleNoise);
    const protocol::AggregatedObservation obs = protocol::transmit(symbols, links, rng_noise);

    std::vector<double> x_hat = channel::unpack_features(obs.x_hat);
    for (auto& v : x_hat) v /= gain;
    const double trial_variance = obs.effective_variance / 2.0 * exp.source_power;
    const double match_variance = setting_variance >= 0.0 ? setting_variance : trial_variance;

    const denoise::SemanticEmbedding z = exp.source->embedding(x_hat);
    RandomStream rng_recon = derive_stream(cfg.seed, pk, trial_index, kRoleRecon);
    const diffusion::ReconstructionResult recon =
        diffusion::reconstruct_features(x_hat, match_variance, *exp.predictor, z.z,
                                        exp.schedule, rng_recon, cfg.reverse_mode);

    TrialOutcome outcome;
    outcome.effective_variance = obs.effective_variance;
    outcome.t_ch = static_cast<double>(recon.match.t_ch);
    if (cfg.source == SourceKind::TextureFrames) {
        const std::size_t n = cfg.frame_size;
        metrics::ImageTensor original{1, n, n, x0};
        metrics::ImageTensor restored{1, n, n, recon.x0_hat};
        for (auto& v : restored.values) v = std::clamp(v, 0.0, 1.0);
        outcome.mse = metrics::mse(original, restored);
        outcome.psnr = metrics::psnr(original, restored, 1.0);
        outcome.msssim =
            metrics::ms_ssim(original, restored, metrics::MsSsimConfig::auto_for(n, n, 1.0));
    } else {
        double err = 0.0;
        for (std::size_t i = 0; i < x0.size(); ++i) {
            const double d = x0[i] - recon.x0_hat[i];
            err += d * d;
        }
        outcome.mse = err / static_cast<double>(x0.size());
        // Feature-domain pseudo-PSNR against a unit range; only comparisons
        // and trends are meaningful for non-image sources.
        outcome.psnr = outcome.mse == 0.0 ? 100.0 : 10.0 * std::log10(1.0 / outcome.mse);
        outcome.msssim = std::numeric_limits<double>::quiet_NaN();
    }
    return outcome;
}

std::vector<TrialOutcome> run_point(const ResolvedExperiment& exp, double snr_db,
                                    std::size_t num_users, bool cooperation) {
    const ExperimentConfig& cfg = exp.config;
    double setting_variance = -1.0;
    if (cfg.tch_mode == TchMode::PerSetting) {
        setting_variance = setting_match_variance(exp, snr_db, num_users, cooperation);
    }
    std::vector<TrialOutcome> outcomes(cfg.trials);
    const std::size_t workers = std::min(cfg.workers, cfg.trials);
    if (workers <= 1) {
        for (std::size_t i = 0; i < cfg.trials; ++i) {
            outcomes[i] =
                run_trial_with_setting(exp, snr_db, num_users, cooperation, i, setting_variance);
        }
        return outcomes;
    }
    std::mutex error_mutex;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < cfg.trials; i += workers) {
                    outcomes[i] = run_trial_with_setting(exp, snr_db, num_users, cooperation, i,
                                                         setting_variance);
                }
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return outcomes;
}

SweepResult run_snr_sweep(const ExperimentConfig& cfg) {
    const ResolvedExperiment exp = resolve_experiment(cfg);
    SweepResult result;
    result.config = cfg;
    result.provenance = make_provenance(cfg);
    for (double snr : cfg.snr_db_list) {
        const std::vector<TrialOutcome> outcomes =
            run_point(exp, snr, cfg.num_users, cfg.cooperation);
        result.records.push_back(summarize(snr, cfg.num_users, cfg.cooperation, outcomes));
    }
    return result;
}

SweepResult run_user_sweep(const ExperimentConfig& cfg) {
    if (cfg.user_list.size() < 2) {
        throw std::invalid_argument("run_user_sweep: need at least two user counts");
    }
    for (std::size_t k : cfg.user_list) {
        if (k == 0) throw std::invalid_argument("run_user_sweep: user counts must be >= 1");
    }
    const ResolvedExperiment exp = resolve_experiment(cfg);
    SweepResult result;
    result.config = cfg;
    result.provenance = make_provenance(cfg);
    for (std::size_t users : cfg.user_list) {
        for (double snr : cfg.snr_db_list) {
            const std::vector<TrialOutcome> outcomes =
                run_point(exp, snr, users, cfg.cooperation);
            result.records.push_back(summarize(snr, users, cfg.cooperation, outcomes));
        }
    }
    return result;
}

AblationResult run_cooperation_ablation(const ExperimentConfig& cfg) {
    const ResolvedExperiment exp = resolve_experiment(cfg);
    AblationResult result;
    result.config = cfg;
    result.provenance = make_provenance(cfg);
    result.with_cooperation.config = cfg;
    result.with_cooperation.provenance = result.provenance;
    result.without_cooperation.config = cfg;
    result.without_cooperation.config.cooperation = false;
    result.without_cooperation.provenance = result.provenance;

    for (double snr : cfg.snr_db_list) {
        const std::vector<TrialOutcome> on = run_point(exp, snr, cfg.num_users, true);
        const std::vector<TrialOutcome> off = run_point(exp, snr, cfg.num_users, false);
        result.with_cooperation.records.push_back(summarize(snr, cfg.num_users, true, on));
        result.without_cooperation.records.push_back(summarize(snr, cfg.num_users, false, off));

        AblationRecord rec;
        rec.snr_db = snr;
        rec.num_users = cfg.num_users;
        rec.trials = on.size();
        const double n = static_cast<double>(on.size());
        double delta_mean = 0.0;
        std::size_t positive = 0;
        for (std::size_t i = 0; i < on.size(); ++i) {
            const double d = on[i].psnr - off[i].psnr;
            delta_mean += d;
            if (d > 0.0) ++positive;
            rec.mean_mse_delta += off[i].mse - on[i].mse;
            rec.mean_msssim_delta += on[i].msssim - off[i].msssim;
            rec.mean_psnr_coop += on[i].psnr;
            rec.mean_psnr_nocoop += off[i].psnr;
        }
        delta_mean /= n;
        rec.mean_psnr_delta = delta_mean;
        rec.mean_psnr_coop /= n;
        rec.mean_psnr_nocoop /= n;
        rec.mean_mse_delta /= n;
        rec.mean_msssim_delta /= n;
        rec.fraction_psnr_delta_positive = static_cast<double>(positive) / n;
        if (on.size() > 1) {
            double acc = 0.0;
            for (std::size_t i = 0; i < on.size(); ++i) {
                const double d = on[i].psnr - off[i].psnr - delta_mean;
                acc += d * d;
            }
            rec.std_psnr_delta = std::sqrt(acc / (n - 1.0));
        }
        result.records.push_back(rec);
    }
    return result;
}

}  // namespace coopdiff::harness
