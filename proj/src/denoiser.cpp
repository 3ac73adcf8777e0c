#include "coopdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace coopdiff::denoise {

namespace {

constexpr double kTimeEmbeddingBase = 10000.0;

std::vector<double> concat_input(const std::vector<double>& x_t, std::size_t t,
                                 const std::vector<double>& z,
                                 const MlpDenoiserParams& params) {
    if (x_t.size() != params.feature_dim) {
        throw std::invalid_argument("mlp_epsilon: feature dimension mismatch");
    }
    if (z.size() != params.cond_dim) {
        throw std::invalid_argument("mlp_epsilon: condition dimension mismatch");
    }
    std::vector<double> u;
    u.reserve(params.input_dim());
    u.insert(u.end(), x_t.begin(), x_t.end());
    const std::vector<double> temb = time_embedding(t, params.time_dim);
    u.insert(u.end(), temb.begin(), temb.end());
    u.insert(u.end(), z.begin(), z.end());
    return u;
}

// y = W u + b, W row-major [rows x cols].
void affine(const std::vector<double>& w, const std::vector<double>& b,
            const std::vector<double>& u, std::vector<double>& y) {
    const std::size_t rows = b.size();
    const std::size_t cols = u.size();
    y.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        const double* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * u[c];
        y[r] = acc;
    }
}

struct ForwardTrace {
    std::vector<double> input;
    std::vector<double> h1;  // tanh(a1)
    std::vector<double> h2;  // tanh(a2)
    std::vector<double> out;
};

ForwardTrace mlp_forward(const std::vector<double>& input, const MlpDenoiserParams& p) {
    ForwardTrace trace;
    trace.input = input;
    affine(p.w1, p.b1, trace.input, trace.h1);
    for (auto& v : trace.h1) v = std::tanh(v);
    affine(p.w2, p.b2, trace.h1, trace.h2);
    for (auto& v : trace.h2) v = std::tanh(v);
    affine(p.w3, p.b3, trace.h2, trace.out);
    return trace;
}

struct GradientView {
    double* w1;
    double* b1;
    double* w2;
    double* b2;
    double* w3;
    double* b3;
};

GradientView make_view(std::vector<double>& flat, const MlpDenoiserParams& p) {
    double* base = flat.data();
    GradientView v{};
    v.w1 = base;
    base += p.w1.size();
    v.b1 = base;
    base += p.b1.size();
    v.w2 = base;
    base += p.w2.size();
    v.b2 = base;
    base += p.b2.size();
    v.w3 = base;
    base += p.w3.size();
    v.b3 = base;
    return v;
}

}  // namespace

std::size_t GaussianMixtureSource::dim() const {
    return components.empty() ? 0 : components.front().mean.size();
}

void GaussianMixtureSource::validate() const {
    if (components.empty()) {
        throw std::invalid_argument("GaussianMixtureSource: no components");
    }
    if (sigma0_sq < 0.0) {
        throw std::invalid_argument("GaussianMixtureSource: sigma0_sq must be >= 0");
    }
    const std::size_t d = components.front().mean.size();
    double total = 0.0;
    for (const auto& c : components) {
        if (c.mean.size() != d) {
            throw std::invalid_argument("GaussianMixtureSource: mean dimension mismatch");
        }
        if (!(c.weight > 0.0)) {
            throw std::invalid_argument("GaussianMixtureSource: weights must be positive");
        }
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("GaussianMixtureSource: weights must sum to 1");
    }
}

std::vector<double> GaussianMixtureSource::sample(RandomStream& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    std::size_t pick = components.size() - 1;
    for (std::size_t c = 0; c < components.size(); ++c) {
        if (u < components[c].weight) {
            pick = c;
            break;
        }
        u -= components[c].weight;
    }
    std::vector<double> x = components[pick].mean;
    if (sigma0_sq > 0.0) {
        std::normal_distribution<double> noise(0.0, std::sqrt(sigma0_sq));
        for (auto& v : x) v += noise(rng);
    }
    return x;
}

double GaussianMixtureSource::per_component_power() const {
    const std::size_t d = dim();
    double power = sigma0_sq;
    for (const auto& c : components) {
        double mean_sq = 0.0;
        for (double m : c.mean) mean_sq += m * m;
        power += c.weight * mean_sq / static_cast<double>(d);
    }
    return power;
}

GaussianMixtureSource make_separated_mixture(std::size_t num_components, std::size_t dim,
                                             double separation, double sigma0_sq) {
    if (num_components == 0 || dim == 0) {
        throw std::invalid_argument("make_separated_mixture: empty source");
    }
    GaussianMixtureSource source;
    source.sigma0_sq = sigma0_sq;
    const double center = (static_cast<double>(num_components) - 1.0) / 2.0;
    for (std::size_t c = 0; c < num_components; ++c) {
        GaussianMixtureSource::Component comp;
        comp.mean.assign(dim, 0.0);
        comp.mean[0] = separation * (static_cast<double>(c) - center);
        comp.weight = 1.0 / static_cast<double>(num_components);
        source.components.push_back(std::move(comp));
    }
    source.validate();
    return source;
}

SemanticEmbedding extract_semantic(const std::vector<double>& x,
                                   const GaussianMixtureSource& source) {
    source.validate();
    if (x.size() != source.dim()) {
        throw std::invalid_argument("extract_semantic: dimension mismatch");
    }
    const std::size_t m = source.components.size();
    SemanticEmbedding embedding;
    embedding.z.assign(m, 0.0);
    if (m == 1) {
        embedding.z[0] = 1.0;
        return embedding;
    }
    // Zero-variance mixtures degenerate to the nearest mean.
    const double variance = source.sigma0_sq > 0.0 ? source.sigma0_sq
                                                   : std::numeric_limits<double>::min();
    std::vector<double> log_post(m);
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
        double dist_sq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - source.components[c].mean[i];
            dist_sq += d * d;
        }
        log_post[c] = std::log(source.components[c].weight) - dist_sq / (2.0 * variance);
        max_log = std::max(max_log, log_post[c]);
    }
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        embedding.z[c] = std::exp(log_post[c] - max_log);
        total += embedding.z[c];
    }
    for (auto& v : embedding.z) v /= total;
    return embedding;
}

std::vector<double> analytic_epsilon(const std::vector<double>& x_t, std::size_t t,
                                     const SemanticEmbedding& z,
                                     const GaussianMixtureSource& source,
                                     const diffusion::DiffusionSchedule& schedule) {
    source.validate();
    if (x_t.size() != source.dim()) {
        throw std::invalid_argument("analytic_epsilon: dimension mismatch");
    }
    if (z.z.size() != source.components.size()) {
        throw std::invalid_argument("analytic_epsilon: embedding size mismatch");
    }
    const double abar = schedule.alpha_bar_at(t);
    const double signal = std::sqrt(abar);
    const double marginal_var = abar * source.sigma0_sq + (1.0 - abar);
    const double eps_coeff = std::sqrt(1.0 - abar) / marginal_var;
    const std::size_t m = source.components.size();

    // Responsibilities: embedding prior times the marginal likelihood of x_t
    // under each component.
    std::vector<double> log_resp(m, -std::numeric_limits<double>::infinity());
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
        if (z.z[c] <= 0.0) continue;
        double dist_sq = 0.0;
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            const double d = x_t[i] - signal * source.components[c].mean[i];
            dist_sq += d * d;
        }
        log_resp[c] = std::log(z.z[c]) - dist_sq / (2.0 * marginal_var);
        max_log = std::max(max_log, log_resp[c]);
    }
    std::vector<double> resp(m, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        if (std::isfinite(log_resp[c])) {
            resp[c] = std::exp(log_resp[c] - max_log);
            total += resp[c];
        }
    }

    std::vector<double> eps_hat(x_t.size(), 0.0);
    for (std::size_t c = 0; c < m; ++c) {
        if (resp[c] == 0.0) continue;
        const double weight = resp[c] / total;
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            eps_hat[i] += weight * eps_coeff * (x_t[i] - signal * source.components[c].mean[i]);
        }
    }
    return eps_hat;
}

std::vector<double> AnalyticDenoiser::predict(const std::vector<double>& x_t, std::size_t t,
                                              const std::vector<double>& condition) const {
    return analytic_epsilon(x_t, t, SemanticEmbedding{condition}, source_, schedule_);
}

std::vector<double> time_embedding(std::size_t t, std::size_t dim) {
    if (dim == 0 || dim % 2 != 0) {
        throw std::invalid_argument("time_embedding: dim must be positive and even");
    }
    std::vector<double> emb(dim);
    const std::size_t half = dim / 2;
    for (std::size_t i = 0; i < half; ++i) {
        const double freq =
            std::pow(kTimeEmbeddingBase, -static_cast<double>(i) / static_cast<double>(half));
        emb[2 * i] = std::sin(static_cast<double>(t) * freq);
        emb[2 * i + 1] = std::cos(static_cast<double>(t) * freq);
    }
    return emb;
}

std::size_t MlpDenoiserParams::parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
}

void MlpDenoiserParams::validate() const {
    if (feature_dim == 0 || hidden_dim == 0 || time_dim == 0 || time_dim % 2 != 0) {
        throw std::invalid_argument("MlpDenoiserParams: bad dimensions");
    }
    if (w1.size() != hidden_dim * input_dim() || b1.size() != hidden_dim ||
        w2.size() != hidden_dim * hidden_dim || b2.size() != hidden_dim ||
        w3.size() != feature_dim * hidden_dim || b3.size() != feature_dim) {
        throw std::invalid_argument("MlpDenoiserParams: inconsistent shapes");
    }
    for (const auto* vec : {&w1, &b1, &w2, &b2, &w3, &b3}) {
        for (double v : *vec) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("MlpDenoiserParams: non-finite value");
            }
        }
    }
}

std::vector<double> MlpDenoiserParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto* vec : {&w1, &b1, &w2, &b2, &w3, &b3}) {
        flat.insert(flat.end(), vec->begin(), vec->end());
    }
    return flat;
}

void MlpDenoiserParams::unflatten(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) {
        throw std::invalid_argument("MlpDenoiserParams: flat size mismatch");
    }
    auto it = flat.begin();
    for (auto* vec : {&w1, &b1, &w2, &b2, &w3, &b3}) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(vec->size()), vec->begin());
        it += static_cast<std::ptrdiff_t>(vec->size());
    }
}

MlpDenoiserParams init_mlp_params(std::size_t feature_dim, std::size_t cond_dim,
                                  std::size_t hidden_dim, std::uint64_t seed,
                                  std::size_t time_dim) {
    MlpDenoiserParams p;
    p.feature_dim = feature_dim;
    p.time_dim = time_dim;
    p.cond_dim = cond_dim;
    p.hidden_dim = hidden_dim;
    p.w1.resize(hidden_dim * p.input_dim());
    p.b1.assign(hidden_dim, 0.0);
    p.w2.resize(hidden_dim * hidden_dim);
    p.b2.assign(hidden_dim, 0.0);
    p.w3.resize(feature_dim * hidden_dim);
    p.b3.assign(feature_dim, 0.0);

    RandomStream rng = derive_stream(seed, 0x1617u);
    auto fill = [&](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : w) v = u(rng);
    };
    fill(p.w1, p.input_dim(), hidden_dim);
    fill(p.w2, hidden_dim, hidden_dim);
    fill(p.w3, hidden_dim, feature_dim);
    p.validate();
    return p;
}

std::vector<double> mlp_epsilon(const std::vector<double>& x_t, std::size_t t,
                                const SemanticEmbedding& z,
                                const MlpDenoiserParams& params) {
    params.validate();
    return mlp_forward(concat_input(x_t, t, z.z, params), params).out;
}

std::vector<double> MlpDenoiser::predict(const std::vector<double>& x_t, std::size_t t,
                                         const std::vector<double>& condition) const {
    return mlp_forward(concat_input(x_t, t, condition, params_), params_).out;
}

double loss_conditional(const std::vector<TrainingSample>& batch,
                        const MlpDenoiserParams& params,
                        const diffusion::DiffusionSchedule& schedule) {
    std::vector<double> grad;
    return loss_and_gradient(batch, params, schedule, grad);
}

double loss_and_gradient(const std::vector<TrainingSample>& batch,
                         const MlpDenoiserParams& params,
                         const diffusion::DiffusionSchedule& schedule,
                         std::vector<double>& grad) {
    if (batch.empty()) {
        throw std::invalid_argument("loss_and_gradient: empty batch");
    }
    params.validate();
    grad.assign(params.parameter_count(), 0.0);
    GradientView g = make_view(grad, params);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    const std::size_t in_dim = params.input_dim();
    const std::size_t hid = params.hidden_dim;
    const std::size_t out_dim = params.feature_dim;

    double loss = 0.0;
    std::vector<double> d_out(out_dim), d_h2(hid), d_h1(hid);
    for (const auto& sample : batch) {
        const diffusion::DiffusionState state =
            diffusion::forward_diffuse(sample.x0, sample.t, sample.eps, schedule);
        const std::vector<double> input =
            concat_input(state.x, sample.t, sample.z.z, params);
        const ForwardTrace trace = mlp_forward(input, params);

        for (std::size_t i = 0; i < out_dim; ++i) {
            const double r = trace.out[i] - sample.eps[i];
            loss += r * r * inv_batch;
            d_out[i] = 2.0 * r * inv_batch;
        }

        // Output layer.
        for (std::size_t r = 0; r < out_dim; ++r) {
            const double d = d_out[r];
            g.b3[r] += d;
            double* row = g.w3 + r * hid;
            for (std::size_t c = 0; c < hid; ++c) row[c] += d * trace.h2[c];
        }
        // d_h2 = W3^T d_out, through tanh.
        std::fill(d_h2.begin(), d_h2.end(), 0.0);
        for (std::size_t r = 0; r < out_dim; ++r) {
            const double d = d_out[r];
            const double* row = params.w3.data() + r * hid;
            for (std::size_t c = 0; c < hid; ++c) d_h2[c] += row[c] * d;
        }
        for (std::size_t c = 0; c < hid; ++c) {
            d_h2[c] *= 1.0 - trace.h2[c] * trace.h2[c];
        }
        // Second hidden layer.
        for (std::size_t r = 0; r < hid; ++r) {
            const double d = d_h2[r];
            g.b2[r] += d;
            double* row = g.w2 + r * hid;
            for (std::size_t c = 0; c < hid; ++c) row[c] += d * trace.h1[c];
        }
        std::fill(d_h1.begin(), d_h1.end(), 0.0);
        for (std::size_t r = 0; r < hid; ++r) {
            const double d = d_h2[r];
            const double* row = params.w2.data() + r * hid;
            for (std::size_t c = 0; c < hid; ++c) d_h1[c] += row[c] * d;
        }
        for (std::size_t c = 0; c < hid; ++c) {
            d_h1[c] *= 1.0 - trace.h1[c] * trace.h1[c];
        }
        // First hidden layer.
        for (std::size_t r = 0; r < hid; ++r) {
            const double d = d_h1[r];
            g.b1[r] += d;
            double* row = g.w1 + r * in_dim;
            for (std::size_t c = 0; c < in_dim; ++c) row[c] += d * trace.input[c];
        }
    }
    return loss;
}

void TrainingConfig::validate() const {
    if (steps == 0 || batch_size == 0 || hidden_dim == 0) {
        throw std::invalid_argument("TrainingConfig: counts must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("TrainingConfig: learning rate must be positive");
    }
}

TrainingResult train_hybrid(const FeatureSource& source, const hybrid::HybridNoiseSpec& spec,
                            const diffusion::DiffusionSchedule& schedule,
                            const TrainingConfig& cfg) {
    cfg.validate();
    if (spec.lambda_schedule.num_steps != schedule.num_steps()) {
        throw std::invalid_argument("train_hybrid: lambda/diffusion schedule length mismatch");
    }
    const std::size_t dim = source.dim();
    const bool pure_gaussian = spec.lambda_schedule.lambda0 == 0.0;

    TrainingResult result;
    result.params = init_mlp_params(dim, source.embedding_dim(), cfg.hidden_dim, cfg.seed);
    RandomStream rng = derive_stream(cfg.seed, 0x7261u);
    std::uniform_int_distribution<std::size_t> uniform_t(1, schedule.num_steps());
    std::normal_distribution<double> gaussian(0.0, 1.0);

    // Adam state (unused for plain gradient descent).
    std::vector<double> m(result.params.parameter_count(), 0.0);
    std::vector<double> v(result.params.parameter_count(), 0.0);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    std::vector<double> flat = result.params.flatten();
    std::vector<double> grad;
    std::vector<TrainingSample> batch(cfg.batch_size);
    double initial_loss = 0.0;
    std::size_t high_loss_streak = 0;

    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        for (auto& sample : batch) {
            sample.x0 = source.sample(rng);
            sample.z = source.embedding(sample.x0);
            sample.t = uniform_t(rng);
            std::vector<double> eps_df(dim);
            for (auto& e : eps_df) e = gaussian(rng);
            if (pure_gaussian) {
                sample.eps = std::move(eps_df);
            } else {
                const protocol::CooperativeLinkSet links = spec.channel_source.sample(rng);
                const hybrid::NormalizedChannelNoise eps_ch =
                    hybrid::normalize_channel_noise(links, rng, dim);
                const double lambda = hybrid::lambda_at(sample.t, spec.lambda_schedule);
                sample.eps = hybrid::mix_noise(eps_ch.values, eps_df, lambda);
            }
        }
        const double loss = loss_and_gradient(batch, result.params, schedule, grad);
        result.loss_trace.push_back(loss);
        if (step == 1) initial_loss = loss;
        if (!std::isfinite(loss)) {
            throw TrainingDivergedError("train_hybrid: loss is no longer finite",
                                        std::move(result.loss_trace));
        }
        if (loss > 10.0 * initial_loss) {
            if (++high_loss_streak >= 100) {
                throw TrainingDivergedError("train_hybrid: loss diverged",
                                            std::move(result.loss_trace));
            }
        } else {
            high_loss_streak = 0;
        }

        if (cfg.optimizer == Optimizer::AdaptiveMoment) {
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < flat.size(); ++i) {
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                flat[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + adam_eps);
            }
        } else {
            for (std::size_t i = 0; i < flat.size(); ++i) {
                flat[i] -= cfg.learning_rate * grad[i];
            }
        }
        result.params.unflatten(flat);
    }
    return result;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ckpt.params.validate();
    nlohmann::json j;
    j["format"] = "coopdiff-checkpoint";
    j["version"] = 1;
    j["shape"] = {{"feature_dim", ckpt.params.feature_dim},
                  {"time_dim", ckpt.params.time_dim},
                  {"cond_dim", ckpt.params.cond_dim},
                  {"hidden_dim", ckpt.params.hidden_dim}};
    j["weights"] = {{"w1", ckpt.params.w1}, {"b1", ckpt.params.b1},
                    {"w2", ckpt.params.w2}, {"b2", ckpt.params.b2},
                    {"w3", ckpt.params.w3}, {"b3", ckpt.params.b3}};
    j["schedule"] = {{"steps", ckpt.schedule_steps},
                     {"beta_start", ckpt.beta_start},
                     {"beta_end", ckpt.beta_end}};
    j["lambda0"] = ckpt.lambda0;
    j["seed"] = ckpt.seed;

    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot open " + path);
    }
    out << j.dump(2) << "\n";
    if (!out) {
        throw std::runtime_error("save_checkpoint: write failed for " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    }
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "coopdiff-checkpoint" || j.value("version", 0) != 1) {
        throw std::runtime_error("load_checkpoint: unrecognized container " + path);
    }
    Checkpoint ckpt;
    ckpt.params.feature_dim = j["shape"]["feature_dim"].get<std::size_t>();
    ckpt.params.time_dim = j["shape"]["time_dim"].get<std::size_t>();
    ckpt.params.cond_dim = j["shape"]["cond_dim"].get<std::size_t>();
    ckpt.params.hidden_dim = j["shape"]["hidden_dim"].get<std::size_t>();
    ckpt.params.w1 = j["weights"]["w1"].get<std::vector<double>>();
    ckpt.params.b1 = j["weights"]["b1"].get<std::vector<double>>();
    ckpt.params.w2 = j["weights"]["w2"].get<std::vector<double>>();
    ckpt.params.b2 = j["weights"]["b2"].get<std::vector<double>>();
    ckpt.params.w3 = j["weights"]["w3"].get<std::vector<double>>();
    ckpt.params.b3 = j["weights"]["b3"].get<std::vector<double>>();
    ckpt.schedule_steps = j["schedule"]["steps"].get<std::size_t>();
    ckpt.beta_start = j["schedule"]["beta_start"].get<double>();
    ckpt.beta_end = j["schedule"]["beta_end"].get<double>();
    ckpt.lambda0 = j["lambda0"].get<double>();
    ckpt.seed = j["seed"].get<std::uint64_t>();
    try {
        ckpt.params.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("load_checkpoint: ") + e.what());
    }
    return ckpt;
}

double heldout_epsilon_mse(const diffusion::EpsilonPredictor& predictor,
                           const FeatureSource& source,
                           const diffusion::DiffusionSchedule& schedule,
                           std::size_t num_draws, std::uint64_t seed) {
    if (num_draws == 0) {
        throw std::invalid_argument("heldout_epsilon_mse: need at least one draw");
    }
    RandomStream rng = derive_stream(seed, 0xE7A1u);
    std::uniform_int_distribution<std::size_t> uniform_t(1, schedule.num_steps());
    std::normal_distribution<double> gaussian(0.0, 1.0);
    const std::size_t dim = source.dim();

    double total = 0.0;
    for (std::size_t i = 0; i < num_draws; ++i) {
        const std::vector<double> x0 = source.sample(rng);
        const SemanticEmbedding z = source.embedding(x0);
        const std::size_t t = uniform_t(rng);
        std::vector<double> eps(dim);
        for (auto& e : eps) e = gaussian(rng);
        const diffusion::DiffusionState state = diffusion::forward_diffuse(x0, t, eps, schedule);
        const std::vector<double> eps_hat = predictor.predict(state.x, t, z.z);
        for (std::size_t k = 0; k < dim; ++k) {
            const double r = eps[k] - eps_hat[k];
            total += r * r;
        }
    }
    return total / static_cast<double>(num_draws * dim);
}

}  // namespace coopdiff::denoise
