#include <cstdio>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "coopdiff/denoiser.hpp"
#include "coopdiff/harness.hpp"

namespace {

using coopdiff::harness::ExperimentConfig;
using coopdiff::harness::ResultFormat;

struct CommonOptions {
    std::string config_path;
    std::string out_path;
    std::string format = "csv";
    std::vector<std::pair<std::string, std::string>> overrides;
};

// Every override flag maps onto a config key and reuses the config parser,
// so the CLI and the config file accept exactly the same values.
void add_common_options(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "Config file (key = value lines)");
    cmd->add_option("-o,--out", opts.out_path, "Output file path");
    cmd->add_option("--format", opts.format, "Output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    static const std::vector<std::pair<std::string, std::string>> kFlagKeys = {
        {"--seed", "seed"},
        {"--users", "num_users"},
        {"--cooperation", "cooperation"},
        {"--channel", "channel"},
        {"--snr", "snr_db_list"},
        {"--user-list", "user_list"},
        {"--feature-dim", "feature_dim"},
        {"--source", "source"},
        {"--mixture-components", "mixture_components"},
        {"--separation", "mixture_separation"},
        {"--sigma0-sq", "sigma0_sq"},
        {"--frame-size", "frame_size"},
        {"--frame-smoothing", "frame_smoothing"},
        {"--schedule-steps", "schedule_steps"},
        {"--beta-start", "beta_start"},
        {"--beta-end", "beta_end"},
        {"--lambda0", "lambda0"},
        {"--h-floor", "h_floor"},
        {"--trials", "trials"},
        {"--denoiser", "denoiser"},
        {"--checkpoint", "checkpoint"},
        {"--workers", "workers"},
        {"--coop-subset", "coop_subset"},
        {"--tch-mode", "tch_mode"},
        {"--reverse-mode", "reverse_mode"},
        {"--embed-timestamp", "embed_timestamp"},
        {"--train-steps", "train_steps"},
        {"--batch-size", "batch_size"},
        {"--lr", "learning_rate"},
        {"--hidden-dim", "hidden_dim"},
        {"--optimizer", "optimizer"},
    };
    for (const auto& [flag, key] : kFlagKeys) {
        const std::string config_key = key;
        cmd->add_option_function<std::string>(
            flag,
            [&opts, config_key](const std::string& value) {
                opts.overrides.emplace_back(config_key, value);
            },
            "Overrides config key " + key);
    }
}

ExperimentConfig build_config(const CommonOptions& opts) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) {
        cfg = coopdiff::harness::load_config_file(opts.config_path);
    }
    coopdiff::harness::apply_config_kv(cfg, opts.overrides);
    return cfg;
}

std::string resolve_out(const CommonOptions& opts, const std::string& default_name) {
    if (!opts.out_path.empty()) return opts.out_path;
    std::string name = default_name;
    if (opts.format == "json") {
        const auto dot = name.rfind('.');
        name = name.substr(0, dot) + ".json";
    }
    const char* dir = std::getenv("COOPDIFF_OUT_DIR");
    if (dir != nullptr && dir[0] != '\0') {
        return std::string(dir) + "/" + name;
    }
    return name;
}

ResultFormat parse_format(const CommonOptions& opts) {
    return opts.format == "json" ? ResultFormat::Json : ResultFormat::Csv;
}

void print_sweep(const coopdiff::harness::SweepResult& result) {
    for (const auto& r : result.records) {
        std::printf("snr=%+.1f dB  K=%zu coop=%d  psnr=%.3f±%.3f  msssim=%.4f  mse=%.6g  "
                    "eff_var=%.6g  t_ch=%.1f\n",
                    r.snr_db, r.num_users, r.cooperation ? 1 : 0, r.mean_psnr, r.std_psnr,
                    r.mean_msssim, r.mean_mse, r.mean_effective_variance, r.mean_t_ch);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative-relay link simulator with diffusion-based feature reconstruction"};
    app.require_subcommand(1);

    CommonOptions snr_opts, user_opts, ablate_opts, train_opts, eval_opts, selftest_opts;

    CLI::App* sweep_snr = app.add_subcommand("sweep-snr", "Sweep SNR points at a fixed user count");
    add_common_options(sweep_snr, snr_opts);

    CLI::App* sweep_users =
        app.add_subcommand("sweep-users", "Sweep the (user count, SNR) grid");
    add_common_options(sweep_users, user_opts);

    CLI::App* ablate = app.add_subcommand(
        "ablate-coop", "Paired cooperation on/off comparison over identical random streams");
    add_common_options(ablate, ablate_opts);

    CLI::App* train = app.add_subcommand("train", "Train the conditional noise predictor");
    add_common_options(train, train_opts);
    std::string checkpoint_out = "denoiser.ckpt.json";
    std::string trace_out;
    train->add_option("--checkpoint-out", checkpoint_out, "Checkpoint output path");
    train->add_option("--trace-out", trace_out, "Loss trace CSV path");

    CLI::App* eval = app.add_subcommand("eval-checkpoint",
                                        "Compare a checkpoint against the closed-form oracle");
    add_common_options(eval, eval_opts);
    std::size_t eval_draws = 20000;
    eval->add_option("--draws", eval_draws, "Held-out draws");

    CLI::App* selftest =
        app.add_subcommand("selftest", "Run the Monte-Carlo-vs-analytic consistency checks");
    add_common_options(selftest, selftest_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep_snr->parsed()) {
            const ExperimentConfig cfg = build_config(snr_opts);
            cfg.validate();
            const auto result = coopdiff::harness::run_snr_sweep(cfg);
            const std::string out = resolve_out(snr_opts, "sweep_snr.csv");
            coopdiff::harness::emit_results(result, parse_format(snr_opts), out);
            print_sweep(result);
            std::printf("wrote %s\n", out.c_str());
        } else if (sweep_users->parsed()) {
            const ExperimentConfig cfg = build_config(user_opts);
            cfg.validate();
            const auto result = coopdiff::harness::run_user_sweep(cfg);
            const std::string out = resolve_out(user_opts, "sweep_users.csv");
            coopdiff::harness::emit_results(result, parse_format(user_opts), out);
            print_sweep(result);
            std::printf("wrote %s\n", out.c_str());
        } else if (ablate->parsed()) {
            const ExperimentConfig cfg = build_config(ablate_opts);
            cfg.validate();
            const auto result = coopdiff::harness::run_cooperation_ablation(cfg);
            const std::string out = resolve_out(ablate_opts, "ablate_coop.csv");
            coopdiff::harness::emit_ablation(result, parse_format(ablate_opts), out);
            for (const auto& r : result.records) {
                std::printf("snr=%+.1f dB  K=%zu  psnr: %.3f vs %.3f  delta=%.3f±%.3f  "
                            "positive=%.1f%%  mse_delta=%.6g\n",
                            r.snr_db, r.num_users, r.mean_psnr_coop, r.mean_psnr_nocoop,
                            r.mean_psnr_delta, r.std_psnr_delta,
                            100.0 * r.fraction_psnr_delta_positive, r.mean_mse_delta);
            }
            std::printf("wrote %s\n", out.c_str());
        } else if (train->parsed()) {
            const ExperimentConfig cfg = build_config(train_opts);
            cfg.validate();
            const auto summary =
                coopdiff::harness::run_training(cfg, checkpoint_out, trace_out);
            std::printf("trained %zu steps: loss %.6g -> %.6g, checkpoint %s\n", summary.steps,
                        summary.first_loss, summary.last_loss, checkpoint_out.c_str());
        } else if (eval->parsed()) {
            const ExperimentConfig cfg = build_config(eval_opts);
            if (cfg.checkpoint.empty()) {
                throw std::invalid_argument("eval-checkpoint: --checkpoint is required");
            }
            const auto report =
                coopdiff::harness::evaluate_checkpoint(cfg, cfg.checkpoint, eval_draws);
            std::printf("heldout mse: mlp=%.6g oracle=%.6g excess=%.2f%%\n", report.mlp_mse,
                        report.oracle_mse, 100.0 * report.excess_ratio);
            for (const auto& b : report.buckets) {
                std::printf("  t in [%4zu, %4zu]: mlp=%.6g oracle=%.6g\n", b.t_lo, b.t_hi,
                            b.mlp_mse, b.oracle_mse);
            }
            if (!eval_opts.out_path.empty()) {
                std::FILE* f = std::fopen(eval_opts.out_path.c_str(), "wb");
                if (f == nullptr) {
                    throw std::runtime_error("cannot open " + eval_opts.out_path);
                }
                const std::string csv = coopdiff::harness::eval_report_to_csv(report);
                std::fwrite(csv.data(), 1, csv.size(), f);
                std::fclose(f);
            }
        } else if (selftest->parsed()) {
            ExperimentConfig cfg = build_config(selftest_opts);
            const auto checks = coopdiff::harness::run_selftest(cfg.seed);
            bool all_pass = true;
            for (const auto& c : checks) {
                all_pass = all_pass && c.pass;
                std::printf("%-36s %s  measured=%.8g expected=%.8g tol=%.3g\n", c.name.c_str(),
                            c.pass ? "PASS" : "FAIL", c.measured, c.expected, c.tolerance);
            }
            const std::string out = resolve_out(selftest_opts, "selftest.csv");
            std::FILE* f = std::fopen(out.c_str(), "wb");
            if (f == nullptr) throw std::runtime_error("cannot open " + out);
            const std::string csv = coopdiff::harness::selftest_to_csv(checks);
            std::fwrite(csv.data(), 1, csv.size(), f);
            std::fclose(f);
            std::printf("wrote %s\n", out.c_str());
            if (!all_pass) return 2;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const coopdiff::denoise::TrainingDivergedError& e) {
        std::fprintf(stderr, "training diverged: %s (%zu steps recorded)\n", e.what(),
                     e.loss_trace.size());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
