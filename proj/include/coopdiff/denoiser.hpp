#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopdiff/diffusion.hpp"
#include "coopdiff/hybrid_noise.hpp"
#include "coopdiff/rng.hpp"

namespace coopdiff::denoise {

// Noise-robust global content descriptor used to condition the reverse chain.
struct SemanticEmbedding {
    std::vector<double> z;
};

// Desk-scale feature source: isotropic Gaussian mixture with shared
// per-component variance.
struct GaussianMixtureSource {
    struct Component {
        std::vector<double> mean;
        double weight = 1.0;
    };
    std::vector<Component> components;
    double sigma0_sq = 1.0;

    std::size_t dim() const;
    void validate() const;
    std::vector<double> sample(RandomStream& rng) const;
    // E[x_i^2] averaged over coordinates.
    double per_component_power() const;
};

// Equal-weight components spread along the first coordinate, `separation`
// apart, centered at the origin.
GaussianMixtureSource make_separated_mixture(std::size_t num_components, std::size_t dim,
                                             double separation, double sigma0_sq);

// Posterior class probabilities of x under the mixture; the embedding
// dimension equals the component count.
SemanticEmbedding extract_semantic(const std::vector<double>& x,
                                   const GaussianMixtureSource& source);

// Closed-form conditional expectation of the forward noise given the noisy
// state, with the embedding acting as the component prior. Exact for a single
// Gaussian; the test oracle for every trained predictor.
std::vector<double> analytic_epsilon(const std::vector<double>& x_t, std::size_t t,
                                     const SemanticEmbedding& z,
                                     const GaussianMixtureSource& source,
                                     const diffusion::DiffusionSchedule& schedule);

class AnalyticDenoiser : public diffusion::EpsilonPredictor {
public:
    AnalyticDenoiser(GaussianMixtureSource source, diffusion::DiffusionSchedule schedule)
        : source_(std::move(source)), schedule_(std::move(schedule)) {}

    std::vector<double> predict(const std::vector<double>& x_t, std::size_t t,
                                const std::vector<double>& condition) const override;

    const GaussianMixtureSource& source() const { return source_; }

private:
    GaussianMixtureSource source_;
    diffusion::DiffusionSchedule schedule_;
};

// Sinusoidal position encoding of the timestep; dim must be even.
std::vector<double> time_embedding(std::size_t t, std::size_t dim);

// Two tanh hidden layers over the concatenation (x_t, time embedding, z).
// Weight matrices are row-major [out x in].
struct MlpDenoiserParams {
    std::size_t feature_dim = 0;
    std::size_t time_dim = 16;
    std::size_t cond_dim = 0;
    std::size_t hidden_dim = 128;
    std::vector<double> w1, b1, w2, b2, w3, b3;

    std::size_t input_dim() const { return feature_dim + time_dim + cond_dim; }
    std::size_t parameter_count() const;
    void validate() const;
    // Flat view in w1, b1, w2, b2, w3, b3 order.
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

// Variance-scaled uniform init, deterministic from the seed.
MlpDenoiserParams init_mlp_params(std::size_t feature_dim, std::size_t cond_dim,
                                  std::size_t hidden_dim, std::uint64_t seed,
                                  std::size_t time_dim = 16);

std::vector<double> mlp_epsilon(const std::vector<double>& x_t, std::size_t t,
                                const SemanticEmbedding& z,
                                const MlpDenoiserParams& params);

class MlpDenoiser : public diffusion::EpsilonPredictor {
public:
    explicit MlpDenoiser(MlpDenoiserParams params) : params_(std::move(params)) {
        params_.validate();
    }

    std::vector<double> predict(const std::vector<double>& x_t, std::size_t t,
                                const std::vector<double>& condition) const override;

    const MlpDenoiserParams& params() const { return params_; }

private:
    MlpDenoiserParams params_;
};

struct TrainingSample {
    std::vector<double> x0;
    std::size_t t = 1;
    std::vector<double> eps;  // prediction target; the hybrid noise in training
    SemanticEmbedding z;
};

// Mean over the batch of ||eps - predictor(x_t, t, z)||^2 with x_t formed by
// forward_diffuse(x0, t, eps).
double loss_conditional(const std::vector<TrainingSample>& batch,
                        const MlpDenoiserParams& params,
                        const diffusion::DiffusionSchedule& schedule);

// Same loss plus its gradient with respect to every parameter, packed in
// flatten() order.
double loss_and_gradient(const std::vector<TrainingSample>& batch,
                         const MlpDenoiserParams& params,
                         const diffusion::DiffusionSchedule& schedule,
                         std::vector<double>& grad);

enum class Optimizer { PlainGradient, AdaptiveMoment };

struct TrainingConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 64;
    double learning_rate = 1e-4;
    Optimizer optimizer = Optimizer::AdaptiveMoment;
    std::uint64_t seed = 1;
    std::size_t hidden_dim = 128;

    void validate() const;
};

class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), loss_trace(std::move(trace)) {}
    std::vector<double> loss_trace;
};

struct TrainingResult {
    MlpDenoiserParams params;
    std::vector<double> loss_trace;  // one batch loss per step
};

// Source abstraction so the trainer also accepts non-mixture feature sources.
class FeatureSource {
public:
    virtual ~FeatureSource() = default;
    virtual std::size_t dim() const = 0;
    virtual std::size_t embedding_dim() const = 0;
    virtual std::vector<double> sample(RandomStream& rng) const = 0;
    virtual SemanticEmbedding embedding(const std::vector<double>& x) const = 0;
};

class MixtureFeatureSource : public FeatureSource {
public:
    explicit MixtureFeatureSource(GaussianMixtureSource source)
        : source_(std::move(source)) {
        source_.validate();
    }

    std::size_t dim() const override { return source_.dim(); }
    std::size_t embedding_dim() const override { return source_.components.size(); }
    std::vector<double> sample(RandomStream& rng) const override { return source_.sample(rng); }
    SemanticEmbedding embedding(const std::vector<double>& x) const override {
        return extract_semantic(x, source_);
    }
    const GaussianMixtureSource& mixture() const { return source_; }

private:
    GaussianMixtureSource source_;
};

// Hybrid-noise training loop: per step and sample, draw clean features and
// their clean condition, a uniform timestep, a channel realization, build the
// mixed noise, noise the clean features with it, and regress the predictor
// onto the mixed noise.
TrainingResult train_hybrid(const FeatureSource& source, const hybrid::HybridNoiseSpec& spec,
                            const diffusion::DiffusionSchedule& schedule,
                            const TrainingConfig& cfg);

// Versioned textual checkpoint: shapes, decimal parameter values, schedule
// metadata, lambda0 and the training seed.
struct Checkpoint {
    MlpDenoiserParams params;
    std::size_t schedule_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double lambda0 = 0.8;
    std::uint64_t seed = 1;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Held-out noise-prediction error of a predictor against fresh draws
// (x0, t, eps) with pure Gaussian noise; used to compare trained networks
// with the closed-form oracle.
double heldout_epsilon_mse(const diffusion::EpsilonPredictor& predictor,
                           const FeatureSource& source,
                           const diffusion::DiffusionSchedule& schedule,
                           std::size_t num_draws, std::uint64_t seed);

}  // namespace coopdiff::denoise
