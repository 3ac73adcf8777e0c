#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "coopdiff/channel.hpp"
#include "coopdiff/denoiser.hpp"
#include "coopdiff/diffusion.hpp"
#include "coopdiff/harness.hpp"
#include "coopdiff/hybrid_noise.hpp"
#include "coopdiff/metrics.hpp"
#include "coopdiff/protocol.hpp"
#include "coopdiff/rng.hpp"

namespace py = pybind11;

using namespace coopdiff;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cooperative-relay link simulation with diffusion-based feature reconstruction";
    m.attr("__version__") = "0.1.0";

    py::class_<RandomStream>(m, "RandomStream")
        .def(py::init<std::uint64_t>(), py::arg("seed"));
    m.def(
        "derive_stream",
        [](std::uint64_t seed, const std::vector<std::uint64_t>& ids) {
            std::uint64_t s = seed;
            for (std::uint64_t id : ids) s = derive_seed(s, id);
            return RandomStream(s);
        },
        py::arg("seed"), py::arg("ids") = std::vector<std::uint64_t>{});

    // channel
    py::class_<channel::ChannelCoefficient>(m, "ChannelCoefficient")
        .def(py::init([](std::complex<double> v) {
                 return channel::ChannelCoefficient{v};
             }),
             py::arg("value") = std::complex<double>(1.0, 0.0))
        .def_readwrite("value", &channel::ChannelCoefficient::value)
        .def("magnitude", &channel::ChannelCoefficient::magnitude)
        .def("power", &channel::ChannelCoefficient::power);
    py::class_<channel::NoiseSpec>(m, "NoiseSpec")
        .def(py::init([](double v) { return channel::NoiseSpec{v}; }), py::arg("variance") = 0.0)
        .def_readwrite("variance", &channel::NoiseSpec::variance);
    m.def("sample_rayleigh", &channel::sample_rayleigh, py::arg("rng"), py::arg("scale"));
    m.def("sample_awgn", &channel::sample_awgn, py::arg("rng"), py::arg("n"), py::arg("spec"));
    m.def("apply_link", &channel::apply_link, py::arg("x"), py::arg("h"), py::arg("noise"));
    m.def(
        "pack_features",
        [](const std::vector<double>& f) { return channel::pack_features(f); },
        py::arg("features"));
    m.def("unpack_features", &channel::unpack_features, py::arg("symbols"));
    m.def("noise_variance_for_snr_db", &channel::noise_variance_for_snr_db, py::arg("snr_db"),
          py::arg("signal_power") = 1.0);

    // protocol
    py::enum_<protocol::Fading>(m, "Fading")
        .value("Awgn", protocol::Fading::Awgn)
        .value("Rayleigh", protocol::Fading::Rayleigh);
    py::class_<protocol::RelayLink>(m, "RelayLink")
        .def(py::init<>())
        .def_readwrite("user", &protocol::RelayLink::user)
        .def_readwrite("src_to_relay", &protocol::RelayLink::src_to_relay)
        .def_readwrite("relay_to_bs", &protocol::RelayLink::relay_to_bs)
        .def_readwrite("noise", &protocol::RelayLink::noise);
    py::class_<protocol::CooperativeLinkSet>(m, "CooperativeLinkSet")
        .def(py::init<>())
        .def_readwrite("direct", &protocol::CooperativeLinkSet::direct)
        .def_readwrite("relays", &protocol::CooperativeLinkSet::relays)
        .def_readwrite("bs_noise", &protocol::CooperativeLinkSet::bs_noise)
        .def_readwrite("h_floor", &protocol::CooperativeLinkSet::h_floor)
        .def("num_copies", &protocol::CooperativeLinkSet::num_copies)
        .def("validate", &protocol::CooperativeLinkSet::validate);
    py::class_<protocol::LinkModel>(m, "LinkModel")
        .def(py::init<>())
        .def_readwrite("num_relays", &protocol::LinkModel::num_relays)
        .def_readwrite("fading", &protocol::LinkModel::fading)
        .def_readwrite("rayleigh_scale", &protocol::LinkModel::rayleigh_scale)
        .def_readwrite("bs_noise_variance", &protocol::LinkModel::bs_noise_variance)
        .def_readwrite("relay_noise_variance", &protocol::LinkModel::relay_noise_variance)
        .def_readwrite("h_floor", &protocol::LinkModel::h_floor)
        .def("sample", &protocol::LinkModel::sample, py::arg("rng"));
    py::class_<protocol::AggregatedObservation>(m, "AggregatedObservation")
        .def_readonly("x_hat", &protocol::AggregatedObservation::x_hat)
        .def_readonly("effective_variance", &protocol::AggregatedObservation::effective_variance)
        .def_readonly("num_copies", &protocol::AggregatedObservation::num_copies);
    m.def("pre_equalize_source", &protocol::pre_equalize_source, py::arg("x"),
          py::arg("h_direct"));
    m.def("relay_forward", &protocol::relay_forward, py::arg("y_received"),
          py::arg("h_src_to_relay"), py::arg("h_direct"), py::arg("h_relay_to_bs"));
    m.def("receive_copies", &protocol::receive_copies, py::arg("x"), py::arg("links"),
          py::arg("rng"));
    m.def(
        "aggregate",
        [](const std::vector<channel::ComplexVector>& copies,
           const protocol::CooperativeLinkSet* links) {
            return protocol::aggregate(copies, links);
        },
        py::arg("copies"), py::arg("links") = nullptr);
    m.def("effective_noise_variance", &protocol::effective_noise_variance, py::arg("links"));
    m.def("transmit", &protocol::transmit, py::arg("x"), py::arg("links"), py::arg("rng"));

    // diffusion
    py::class_<diffusion::DiffusionSchedule>(m, "DiffusionSchedule")
        .def_readonly("beta", &diffusion::DiffusionSchedule::beta)
        .def_readonly("alpha", &diffusion::DiffusionSchedule::alpha)
        .def_readonly("alpha_bar", &diffusion::DiffusionSchedule::alpha_bar)
        .def("num_steps", &diffusion::DiffusionSchedule::num_steps)
        .def("beta_at", &diffusion::DiffusionSchedule::beta_at, py::arg("t"))
        .def("alpha_at", &diffusion::DiffusionSchedule::alpha_at, py::arg("t"))
        .def("alpha_bar_at", &diffusion::DiffusionSchedule::alpha_bar_at, py::arg("t"));
    m.def("build_linear_schedule", &diffusion::build_linear_schedule, py::arg("num_steps"),
          py::arg("beta_start"), py::arg("beta_end"));
    py::class_<diffusion::DiffusionState>(m, "DiffusionState")
        .def(py::init([](std::vector<double> x, std::size_t t) {
                 return diffusion::DiffusionState{std::move(x), t};
             }),
             py::arg("x"), py::arg("t"))
        .def_readwrite("x", &diffusion::DiffusionState::x)
        .def_readwrite("t", &diffusion::DiffusionState::t);
    m.def("forward_diffuse", &diffusion::forward_diffuse, py::arg("x0"), py::arg("t"),
          py::arg("eps"), py::arg("schedule"));
    py::class_<diffusion::TimestepMatch>(m, "TimestepMatch")
        .def_readonly("t_ch", &diffusion::TimestepMatch::t_ch)
        .def_readonly("scale", &diffusion::TimestepMatch::scale)
        .def_readonly("alpha_bar", &diffusion::TimestepMatch::alpha_bar)
        .def_readonly("saturated", &diffusion::TimestepMatch::saturated);
    m.def("match_channel_timestep", &diffusion::match_channel_timestep,
          py::arg("effective_variance"), py::arg("schedule"));
    m.def(
        "reverse_step",
        [](const diffusion::DiffusionState& state, const std::vector<double>& eps_hat,
           const diffusion::DiffusionSchedule& schedule, RandomStream* rng) {
            return diffusion::reverse_step(state, eps_hat, schedule, rng);
        },
        py::arg("state"), py::arg("eps_hat"), py::arg("schedule"), py::arg("rng") = nullptr);
    py::enum_<diffusion::ReverseMode>(m, "ReverseMode")
        .value("Mean", diffusion::ReverseMode::Mean)
        .value("Ancestral", diffusion::ReverseMode::Ancestral);
    py::class_<diffusion::ReconstructionResult>(m, "ReconstructionResult")
        .def_readonly("x0_hat", &diffusion::ReconstructionResult::x0_hat)
        .def_readonly("match", &diffusion::ReconstructionResult::match);
    py::class_<diffusion::EpsilonPredictor>(m, "EpsilonPredictor")
        .def("predict", &diffusion::EpsilonPredictor::predict, py::arg("x_t"), py::arg("t"),
             py::arg("condition"));
    m.def("reconstruct_features", &diffusion::reconstruct_features, py::arg("x_hat"),
          py::arg("noise_variance"), py::arg("denoiser"), py::arg("condition"),
          py::arg("schedule"), py::arg("rng"), py::arg("mode") = diffusion::ReverseMode::Mean);
    m.def("sample_from_channel_state", &diffusion::sample_from_channel_state, py::arg("obs"),
          py::arg("denoiser"), py::arg("condition"), py::arg("schedule"), py::arg("rng"),
          py::arg("mode") = diffusion::ReverseMode::Mean);

    // hybrid noise
    py::class_<hybrid::LambdaSchedule>(m, "LambdaSchedule")
        .def(py::init([](double lambda0, std::size_t num_steps) {
                 return hybrid::LambdaSchedule{lambda0, num_steps};
             }),
             py::arg("lambda0"), py::arg("num_steps"))
        .def_readwrite("lambda0", &hybrid::LambdaSchedule::lambda0)
        .def_readwrite("num_steps", &hybrid::LambdaSchedule::num_steps);
    m.def("lambda_at", &hybrid::lambda_at, py::arg("t"), py::arg("schedule"));
    py::class_<hybrid::NormalizedChannelNoise>(m, "NormalizedChannelNoise")
        .def_readonly("values", &hybrid::NormalizedChannelNoise::values)
        .def_readonly("degenerate", &hybrid::NormalizedChannelNoise::degenerate);
    m.def("normalize_channel_noise", &hybrid::normalize_channel_noise, py::arg("links"),
          py::arg("rng"), py::arg("n"));
    m.def("mix_noise", &hybrid::mix_noise, py::arg("eps_ch"), py::arg("eps_df"),
          py::arg("lambda_t"));

    // denoiser
    py::class_<denoise::SemanticEmbedding>(m, "SemanticEmbedding")
        .def(py::init([](std::vector<double> z) {
                 return denoise::SemanticEmbedding{std::move(z)};
             }),
             py::arg("z"))
        .def_readwrite("z", &denoise::SemanticEmbedding::z);
    py::class_<denoise::GaussianMixtureSource>(m, "GaussianMixtureSource")
        .def_readonly("sigma0_sq", &denoise::GaussianMixtureSource::sigma0_sq)
        .def("dim", &denoise::GaussianMixtureSource::dim)
        .def("sample", &denoise::GaussianMixtureSource::sample, py::arg("rng"))
        .def("per_component_power", &denoise::GaussianMixtureSource::per_component_power);
    m.def("make_separated_mixture", &denoise::make_separated_mixture, py::arg("num_components"),
          py::arg("dim"), py::arg("separation"), py::arg("sigma0_sq"));
    m.def("extract_semantic", &denoise::extract_semantic, py::arg("x"), py::arg("source"));
    m.def("analytic_epsilon", &denoise::analytic_epsilon, py::arg("x_t"), py::arg("t"),
          py::arg("z"), py::arg("source"), py::arg("schedule"));
    py::class_<denoise::AnalyticDenoiser, diffusion::EpsilonPredictor>(m, "AnalyticDenoiser")
        .def(py::init<denoise::GaussianMixtureSource, diffusion::DiffusionSchedule>(),
             py::arg("source"), py::arg("schedule"));
    py::class_<denoise::MlpDenoiserParams>(m, "MlpDenoiserParams")
        .def_readonly("feature_dim", &denoise::MlpDenoiserParams::feature_dim)
        .def_readonly("hidden_dim", &denoise::MlpDenoiserParams::hidden_dim)
        .def_readonly("cond_dim", &denoise::MlpDenoiserParams::cond_dim)
        .def("parameter_count", &denoise::MlpDenoiserParams::parameter_count);
    py::class_<denoise::MlpDenoiser, diffusion::EpsilonPredictor>(m, "MlpDenoiser")
        .def(py::init<denoise::MlpDenoiserParams>(), py::arg("params"));
    m.def("load_checkpoint", &denoise::load_checkpoint, py::arg("path"));
    py::class_<denoise::Checkpoint>(m, "Checkpoint")
        .def_readonly("params", &denoise::Checkpoint::params)
        .def_readonly("lambda0", &denoise::Checkpoint::lambda0)
        .def_readonly("seed", &denoise::Checkpoint::seed);

    // metrics
    py::class_<metrics::ImageTensor>(m, "ImageTensor")
        .def(py::init([](std::size_t c, std::size_t h, std::size_t w, std::vector<double> v) {
                 return metrics::ImageTensor{c, h, w, std::move(v)};
             }),
             py::arg("channels"), py::arg("height"), py::arg("width"), py::arg("values"))
        .def_readwrite("values", &metrics::ImageTensor::values);
    m.def("mse", &metrics::mse, py::arg("a"), py::arg("b"));
    m.def("psnr", &metrics::psnr, py::arg("a"), py::arg("b"), py::arg("max_value"),
          py::arg("cap_db") = 100.0);
    py::class_<metrics::MsSsimConfig>(m, "MsSsimConfig")
        .def_static("standard", &metrics::MsSsimConfig::standard, py::arg("max_value"))
        .def_static("auto_for", &metrics::MsSsimConfig::auto_for, py::arg("height"),
                    py::arg("width"), py::arg("max_value"))
        .def_readwrite("num_scales", &metrics::MsSsimConfig::num_scales);
    m.def("ms_ssim", &metrics::ms_ssim, py::arg("a"), py::arg("b"), py::arg("cfg"));

    // harness
    py::enum_<harness::SourceKind>(m, "SourceKind")
        .value("GaussianMixture", harness::SourceKind::GaussianMixture)
        .value("TextureFrames", harness::SourceKind::TextureFrames);
    py::enum_<harness::DenoiserKind>(m, "DenoiserKind")
        .value("Analytic", harness::DenoiserKind::Analytic)
        .value("Trained", harness::DenoiserKind::Trained);
    py::class_<harness::ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("seed", &harness::ExperimentConfig::seed)
        .def_readwrite("num_users", &harness::ExperimentConfig::num_users)
        .def_readwrite("cooperation", &harness::ExperimentConfig::cooperation)
        .def_readwrite("fading", &harness::ExperimentConfig::fading)
        .def_readwrite("snr_db_list", &harness::ExperimentConfig::snr_db_list)
        .def_readwrite("user_list", &harness::ExperimentConfig::user_list)
        .def_readwrite("feature_dim", &harness::ExperimentConfig::feature_dim)
        .def_readwrite("source", &harness::ExperimentConfig::source)
        .def_readwrite("mixture_components", &harness::ExperimentConfig::mixture_components)
        .def_readwrite("mixture_separation", &harness::ExperimentConfig::mixture_separation)
        .def_readwrite("sigma0_sq", &harness::ExperimentConfig::sigma0_sq)
        .def_readwrite("frame_size", &harness::ExperimentConfig::frame_size)
        .def_readwrite("frame_smoothing", &harness::ExperimentConfig::frame_smoothing)
        .def_readwrite("schedule_steps", &harness::ExperimentConfig::schedule_steps)
        .def_readwrite("beta_start", &harness::ExperimentConfig::beta_start)
        .def_readwrite("beta_end", &harness::ExperimentConfig::beta_end)
        .def_readwrite("lambda0", &harness::ExperimentConfig::lambda0)
        .def_readwrite("h_floor", &harness::ExperimentConfig::h_floor)
        .def_readwrite("trials", &harness::ExperimentConfig::trials)
        .def_readwrite("denoiser", &harness::ExperimentConfig::denoiser)
        .def_readwrite("checkpoint", &harness::ExperimentConfig::checkpoint)
        .def_readwrite("workers", &harness::ExperimentConfig::workers)
        .def_readwrite("reverse_mode", &harness::ExperimentConfig::reverse_mode)
        .def("validate", &harness::ExperimentConfig::validate);
    py::class_<harness::PointRecord>(m, "PointRecord")
        .def_readonly("snr_db", &harness::PointRecord::snr_db)
        .def_readonly("num_users", &harness::PointRecord::num_users)
        .def_readonly("cooperation", &harness::PointRecord::cooperation)
        .def_readonly("trials", &harness::PointRecord::trials)
        .def_readonly("mean_psnr", &harness::PointRecord::mean_psnr)
        .def_readonly("std_psnr", &harness::PointRecord::std_psnr)
        .def_readonly("mean_msssim", &harness::PointRecord::mean_msssim)
        .def_readonly("std_msssim", &harness::PointRecord::std_msssim)
        .def_readonly("mean_mse", &harness::PointRecord::mean_mse)
        .def_readonly("std_mse", &harness::PointRecord::std_mse)
        .def_readonly("mean_effective_variance",
                      &harness::PointRecord::mean_effective_variance)
        .def_readonly("mean_t_ch", &harness::PointRecord::mean_t_ch);
    py::class_<harness::SweepResult>(m, "SweepResult")
        .def_readonly("records", &harness::SweepResult::records);
    py::class_<harness::AblationRecord>(m, "AblationRecord")
        .def_readonly("snr_db", &harness::AblationRecord::snr_db)
        .def_readonly("mean_psnr_delta", &harness::AblationRecord::mean_psnr_delta)
        .def_readonly("fraction_psnr_delta_positive",
                      &harness::AblationRecord::fraction_psnr_delta_positive)
        .def_readonly("mean_mse_delta", &harness::AblationRecord::mean_mse_delta);
    py::class_<harness::AblationResult>(m, "AblationResult")
        .def_readonly("records", &harness::AblationResult::records);
    m.def("run_snr_sweep", &harness::run_snr_sweep, py::arg("config"));
    m.def("run_user_sweep", &harness::run_user_sweep, py::arg("config"));
    m.def("run_cooperation_ablation", &harness::run_cooperation_ablation, py::arg("config"));
    m.def("sweep_to_csv", &harness::to_csv, py::arg("result"));
    m.def(
        "run_selftest",
        [](std::uint64_t seed) {
            std::vector<py::dict> rows;
            for (const auto& c : harness::run_selftest(seed)) {
                py::dict row;
                row["name"] = c.name;
                row["measured"] = c.measured;
                row["expected"] = c.expected;
                row["tolerance"] = c.tolerance;
                row["pass"] = c.pass;
                rows.push_back(row);
            }
            return rows;
        },
        py::arg("seed") = 1);
}
