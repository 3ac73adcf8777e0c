#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "coopdiff/denoiser.hpp"
#include "coopdiff/diffusion.hpp"
#include "coopdiff/metrics.hpp"
#include "coopdiff/protocol.hpp"

namespace coopdiff::harness {

inline constexpr const char* kCodeVersion = "coopdiff 0.1.0";

enum class SourceKind { GaussianMixture, TextureFrames };
enum class DenoiserKind { Analytic, Trained };
enum class TchMode { PerFrame, PerSetting };

// Full description of one experiment. Everything that influences results is
// in here, so (seed, config) reproduces any run exactly.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::size_t num_users = 8;
    bool cooperation = true;
    protocol::Fading fading = protocol::Fading::Rayleigh;
    std::vector<double> snr_db_list = {0.0};
    std::vector<std::size_t> user_list;  // user sweeps only
    std::size_t feature_dim = 16;

    SourceKind source = SourceKind::GaussianMixture;
    std::size_t mixture_components = 1;
    double mixture_separation = 0.0;
    double sigma0_sq = 1.0;
    std::size_t frame_size = 32;
    double frame_smoothing = 2.0;

    std::size_t schedule_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double lambda0 = 0.8;
    double h_floor = 0.05;
    std::size_t trials = 100;

    DenoiserKind denoiser = DenoiserKind::Analytic;
    std::string checkpoint;
    std::size_t workers = 1;
    std::size_t coop_subset = 0;  // 0 = all idle users relay
    TchMode tch_mode = TchMode::PerFrame;
    diffusion::ReverseMode reverse_mode = diffusion::ReverseMode::Mean;
    bool embed_timestamp = false;

    // Training-only settings.
    std::size_t train_steps = 2000;
    std::size_t batch_size = 64;
    double learning_rate = 1e-4;
    std::size_t hidden_dim = 128;
    denoise::Optimizer optimizer = denoise::Optimizer::AdaptiveMoment;

    void validate() const;
};

// Flat key=value view used by the config file, CLI echo and result headers.
std::vector<std::pair<std::string, std::string>> config_to_kv(const ExperimentConfig& cfg);
ExperimentConfig config_from_kv(
    const std::vector<std::pair<std::string, std::string>>& kv);
void apply_config_kv(ExperimentConfig& cfg,
                     const std::vector<std::pair<std::string, std::string>>& kv);
ExperimentConfig load_config_file(const std::string& path);

struct PointRecord {
    double snr_db = 0.0;
    std::size_t num_users = 1;
    bool cooperation = false;
    std::size_t trials = 0;
    double mean_psnr = 0.0, std_psnr = 0.0;
    double mean_msssim = 0.0, std_msssim = 0.0;
    double mean_mse = 0.0, std_mse = 0.0;
    double mean_effective_variance = 0.0;
    double mean_t_ch = 0.0;
};

bool records_equal(const PointRecord& a, const PointRecord& b);

struct Provenance {
    std::uint64_t seed = 0;
    std::string code_version = kCodeVersion;
    std::string timestamp;  // empty unless embed_timestamp is set
};

struct SweepResult {
    ExperimentConfig config;
    Provenance provenance;
    std::vector<PointRecord> records;
};

bool results_equal(const SweepResult& a, const SweepResult& b);

// One grid cell per SNR point at the configured user count.
SweepResult run_snr_sweep(const ExperimentConfig& cfg);

// One grid cell per (user count, SNR) pair; needs at least two user counts.
SweepResult run_user_sweep(const ExperimentConfig& cfg);

struct AblationRecord {
    double snr_db = 0.0;
    std::size_t num_users = 1;
    std::size_t trials = 0;
    double mean_psnr_coop = 0.0;
    double mean_psnr_nocoop = 0.0;
    double mean_psnr_delta = 0.0;
    double std_psnr_delta = 0.0;
    double fraction_psnr_delta_positive = 0.0;
    double mean_mse_delta = 0.0;  // mse(no coop) - mse(coop); positive favors cooperation
    double mean_msssim_delta = 0.0;
};

struct AblationResult {
    ExperimentConfig config;
    Provenance provenance;
    SweepResult with_cooperation;
    SweepResult without_cooperation;
    std::vector<AblationRecord> records;
};

// Runs the identical per-trial random streams twice, toggling only the
// cooperation flag, and pairs the outcomes trial by trial.
AblationResult run_cooperation_ablation(const ExperimentConfig& cfg);

enum class ResultFormat { Csv, Json };

std::string to_csv(const SweepResult& result);
SweepResult sweep_from_csv(const std::string& text);
std::string to_json_text(const SweepResult& result);
SweepResult sweep_from_json(const std::string& text);

std::string ablation_to_csv(const AblationResult& result);

void emit_results(const SweepResult& result, ResultFormat format, const std::string& path);
SweepResult parse_results(const std::string& path, ResultFormat format);
void emit_ablation(const AblationResult& result, ResultFormat format, const std::string& path);

// Monte-Carlo-vs-analytic consistency checks; all deterministic in the seed.
struct CheckRecord {
    std::string name;
    double measured = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

std::vector<CheckRecord> run_selftest(std::uint64_t seed);
std::string selftest_to_csv(const std::vector<CheckRecord>& checks);

// Trains per the config (Algorithm-style hybrid loop) and writes the
// checkpoint plus a per-step loss trace.
struct TrainSummary {
    double first_loss = 0.0;
    double last_loss = 0.0;
    std::size_t steps = 0;
};
TrainSummary run_training(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                          const std::string& trace_csv_path);

// Held-out comparison of a trained checkpoint against the closed-form oracle,
// overall and bucketed by timestep.
struct EvalReport {
    double mlp_mse = 0.0;
    double oracle_mse = 0.0;
    double excess_ratio = 0.0;  // mlp / oracle - 1
    struct Bucket {
        std::size_t t_lo = 0, t_hi = 0;
        double mlp_mse = 0.0;
        double oracle_mse = 0.0;
    };
    std::vector<Bucket> buckets;
};
EvalReport evaluate_checkpoint(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                               std::size_t num_draws);
std::string eval_report_to_csv(const EvalReport& report);

// Texture frame generator: smoothed Gaussian noise mapped into [0, 1].
class TextureFrameSource : public denoise::FeatureSource {
public:
    TextureFrameSource(std::size_t size, double smoothing_sigma);

    std::size_t dim() const override { return size_ * size_; }
    std::size_t embedding_dim() const override { return 1; }
    std::vector<double> sample(RandomStream& rng) const override;
    denoise::SemanticEmbedding embedding(const std::vector<double>&) const override {
        return denoise::SemanticEmbedding{{1.0}};
    }
    std::size_t frame_size() const { return size_; }

private:
    std::size_t size_;
    double sigma_;
    std::vector<double> kernel_;
    double field_rms_ = 1.0;
};

// Shared plumbing for trials; exposed for the acceptance suite.
struct ResolvedExperiment {
    ExperimentConfig config;
    diffusion::DiffusionSchedule schedule;
    std::unique_ptr<denoise::FeatureSource> source;
    denoise::GaussianMixtureSource model;  // analytic stand-in for the source
    double source_power = 1.0;             // E[x_i^2] of the source
    std::unique_ptr<diffusion::EpsilonPredictor> predictor;
};

ResolvedExperiment resolve_experiment(const ExperimentConfig& cfg);

struct TrialOutcome {
    double psnr = 0.0;
    double msssim = 0.0;
    double mse = 0.0;
    double effective_variance = 0.0;  // complex per-symbol
    double t_ch = 0.0;
};

// End-to-end transmission of one frame at one grid point. Streams derive
// from (seed, snr, users, trial, role), so outcomes are order-independent
// and cooperation toggling preserves the shared randomness.
TrialOutcome run_trial(const ResolvedExperiment& exp, double snr_db, std::size_t num_users,
                       bool cooperation, std::size_t trial_index);

// setting_variance >= 0 pins the timestep-matching variance for every trial
// of a point (the per-setting averaging mode); negative means per-frame.
TrialOutcome run_trial_with_setting(const ResolvedExperiment& exp, double snr_db,
                                    std::size_t num_users, bool cooperation,
                                    std::size_t trial_index, double setting_variance);

std::vector<TrialOutcome> run_point(const ResolvedExperiment& exp, double snr_db,
                                    std::size_t num_users, bool cooperation);

Provenance make_provenance(const ExperimentConfig& cfg);

}  // namespace coopdiff::harness
