#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "coopdiff/harness.hpp"

namespace coopdiff::harness {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) {
        throw std::invalid_argument("cannot parse number: " + s);
    }
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    return std::stoull(s);
}

std::vector<std::string> split(const std::string& s, char delim) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == delim) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(',');
        out += fmt_double(v[i]);
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(',');
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    if (trim(s).empty()) return out;
    for (const auto& part : split(s, ',')) out.push_back(parse_double(trim(part)));
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::vector<std::size_t> out;
    if (trim(s).empty()) return out;
    for (const auto& part : split(s, ',')) out.push_back(parse_u64(trim(part)));
    return out;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("cannot parse bool: " + s);
}

bool same_double(double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

constexpr const char* kSweepMagic = "# coopdiff-sweep v1";
constexpr const char* kAblationMagic = "# coopdiff-ablation v1";
constexpr const char* kSweepHeader =
    "snr_db,num_users,cooperation,trials,mean_psnr,std_psnr,mean_msssim,std_msssim,"
    "mean_mse,std_mse,mean_effective_variance,mean_t_ch";
constexpr const char* kAblationHeader =
    "snr_db,num_users,trials,mean_psnr_coop,mean_psnr_nocoop,mean_psnr_delta,"
    "std_psnr_delta,fraction_psnr_delta_positive,mean_mse_delta,mean_msssim_delta";

std::string config_line(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [key, value] : config_to_kv(cfg)) {
        if (!out.empty()) out.push_back(';');
        out += key + "=" + value;
    }
    return out;
}

ExperimentConfig config_from_line(const std::string& line) {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& item : split(line, ';')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("bad config item: " + item);
        }
        kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return config_from_kv(kv);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

nlohmann::json record_to_json(const PointRecord& r) {
    return nlohmann::json{{"snr_db", r.snr_db},
                          {"num_users", r.num_users},
                          {"cooperation", r.cooperation},
                          {"trials", r.trials},
                          {"mean_psnr", r.mean_psnr},
                          {"std_psnr", r.std_psnr},
                          {"mean_msssim", r.mean_msssim},
                          {"std_msssim", r.std_msssim},
                          {"mean_mse", r.mean_mse},
                          {"std_mse", r.std_mse},
                          {"mean_effective_variance", r.mean_effective_variance},
                          {"mean_t_ch", r.mean_t_ch}};
}

double json_number(const nlohmann::json& j) {
    // NaN round-trips as null in JSON.
    if (j.is_null()) return std::nan("");
    return j.get<double>();
}

PointRecord record_from_json(const nlohmann::json& j) {
    PointRecord r;
    r.snr_db = json_number(j.at("snr_db"));
    r.num_users = j.at("num_users").get<std::size_t>();
    r.cooperation = j.at("cooperation").get<bool>();
    r.trials = j.at("trials").get<std::size_t>();
    r.mean_psnr = json_number(j.at("mean_psnr"));
    r.std_psnr = json_number(j.at("std_psnr"));
    r.mean_msssim = json_number(j.at("mean_msssim"));
    r.std_msssim = json_number(j.at("std_msssim"));
    r.mean_mse = json_number(j.at("mean_mse"));
    r.std_mse = json_number(j.at("std_mse"));
    r.mean_effective_variance = json_number(j.at("mean_effective_variance"));
    r.mean_t_ch = json_number(j.at("mean_t_ch"));
    return r;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_to_kv(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("seed", std::to_string(cfg.seed));
    kv.emplace_back("num_users", std::to_string(cfg.num_users));
    kv.emplace_back("cooperation", cfg.cooperation ? "true" : "false");
    kv.emplace_back("channel", cfg.fading == protocol::Fading::Awgn ? "awgn" : "rayleigh");
    kv.emplace_back("snr_db_list", join_doubles(cfg.snr_db_list));
    kv.emplace_back("user_list", join_sizes(cfg.user_list));
    kv.emplace_back("feature_dim", std::to_string(cfg.feature_dim));
    kv.emplace_back("source", cfg.source == SourceKind::TextureFrames ? "frames" : "mixture");
    kv.emplace_back("mixture_components", std::to_string(cfg.mixture_components));
    kv.emplace_back("mixture_separation", fmt_double(cfg.mixture_separation));
    kv.emplace_back("sigma0_sq", fmt_double(cfg.sigma0_sq));
    kv.emplace_back("frame_size", std::to_string(cfg.frame_size));
    kv.emplace_back("frame_smoothing", fmt_double(cfg.frame_smoothing));
    kv.emplace_back("schedule_steps", std::to_string(cfg.schedule_steps));
    kv.emplace_back("beta_start", fmt_double(cfg.beta_start));
    kv.emplace_back("beta_end", fmt_double(cfg.beta_end));
    kv.emplace_back("lambda0", fmt_double(cfg.lambda0));
    kv.emplace_back("h_floor", fmt_double(cfg.h_floor));
    kv.emplace_back("trials", std::to_string(cfg.trials));
    kv.emplace_back("denoiser", cfg.denoiser == DenoiserKind::Trained ? "trained" : "analytic");
    kv.emplace_back("checkpoint", cfg.checkpoint);
    // Worker count never changes results, so it stays out of the echo and
    // emitted files are byte-identical across parallelism settings.
    kv.emplace_back("coop_subset", std::to_string(cfg.coop_subset));
    kv.emplace_back("tch_mode",
                    cfg.tch_mode == TchMode::PerSetting ? "per-setting" : "per-frame");
    kv.emplace_back("reverse_mode",
                    cfg.reverse_mode == diffusion::ReverseMode::Ancestral ? "ancestral" : "mean");
    kv.emplace_back("embed_timestamp", cfg.embed_timestamp ? "true" : "false");
    kv.emplace_back("train_steps", std::to_string(cfg.train_steps));
    kv.emplace_back("batch_size", std::to_string(cfg.batch_size));
    kv.emplace_back("learning_rate", fmt_double(cfg.learning_rate));
    kv.emplace_back("hidden_dim", std::to_string(cfg.hidden_dim));
    kv.emplace_back("optimizer",
                    cfg.optimizer == denoise::Optimizer::PlainGradient ? "plain-gradient"
                                                                       : "adaptive-moment");
    return kv;
}

ExperimentConfig config_from_kv(
    const std::vector<std::pair<std::string, std::string>>& kv) {
    ExperimentConfig cfg;
    apply_config_kv(cfg, kv);
    return cfg;
}

void apply_config_kv(ExperimentConfig& cfg,
                     const std::vector<std::pair<std::string, std::string>>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "seed") cfg.seed = parse_u64(value);
        else if (key == "num_users") cfg.num_users = parse_u64(value);
        else if (key == "cooperation") cfg.cooperation = parse_bool(value);
        else if (key == "channel") {
            if (value == "awgn") cfg.fading = protocol::Fading::Awgn;
            else if (value == "rayleigh") cfg.fading = protocol::Fading::Rayleigh;
            else throw std::invalid_argument("config: unknown channel " + value);
        } else if (key == "snr_db_list") cfg.snr_db_list = parse_double_list(value);
        else if (key == "user_list") cfg.user_list = parse_size_list(value);
        else if (key == "feature_dim") cfg.feature_dim = parse_u64(value);
        else if (key == "source") {
            if (value == "mixture") cfg.source = SourceKind::GaussianMixture;
            else if (value == "frames") cfg.source = SourceKind::TextureFrames;
            else throw std::invalid_argument("config: unknown source " + value);
        } else if (key == "mixture_components") cfg.mixture_components = parse_u64(value);
        else if (key == "mixture_separation") cfg.mixture_separation = parse_double(value);
        else if (key == "sigma0_sq") cfg.sigma0_sq = parse_double(value);
        else if (key == "frame_size") cfg.frame_size = parse_u64(value);
        else if (key == "frame_smoothing") cfg.frame_smoothing = parse_double(value);
        else if (key == "schedule_steps") cfg.schedule_steps = parse_u64(value);
        else if (key == "beta_start") cfg.beta_start = parse_double(value);
        else if (key == "beta_end") cfg.beta_end = parse_double(value);
        else if (key == "lambda0") cfg.lambda0 = parse_double(value);
        else if (key == "h_floor") cfg.h_floor = parse_double(value);
        else if (key == "trials") cfg.trials = parse_u64(value);
        else if (key == "denoiser") {
            if (value == "analytic") cfg.denoiser = DenoiserKind::Analytic;
            else if (value == "trained") cfg.denoiser = DenoiserKind::Trained;
            else throw std::invalid_argument("config: unknown denoiser " + value);
        } else if (key == "checkpoint") cfg.checkpoint = value;
        else if (key == "workers") cfg.workers = parse_u64(value);
        else if (key == "coop_subset") cfg.coop_subset = parse_u64(value);
        else if (key == "tch_mode") {
            if (value == "per-frame") cfg.tch_mode = TchMode::PerFrame;
            else if (value == "per-setting") cfg.tch_mode = TchMode::PerSetting;
            else throw std::invalid_argument("config: unknown tch_mode " + value);
        } else if (key == "reverse_mode") {
            if (value == "mean") cfg.reverse_mode = diffusion::ReverseMode::Mean;
            else if (value == "ancestral") cfg.reverse_mode = diffusion::ReverseMode::Ancestral;
            else throw std::invalid_argument("config: unknown reverse_mode " + value);
        } else if (key == "embed_timestamp") cfg.embed_timestamp = parse_bool(value);
        else if (key == "train_steps") cfg.train_steps = parse_u64(value);
        else if (key == "batch_size") cfg.batch_size = parse_u64(value);
        else if (key == "learning_rate") cfg.learning_rate = parse_double(value);
        else if (key == "hidden_dim") cfg.hidden_dim = parse_u64(value);
        else if (key == "optimizer") {
            if (value == "plain-gradient") cfg.optimizer = denoise::Optimizer::PlainGradient;
            else if (value == "adaptive-moment") {
                cfg.optimizer = denoise::Optimizer::AdaptiveMoment;
            } else throw std::invalid_argument("config: unknown optimizer " + value);
        } else {
            throw std::invalid_argument("config: unknown key " + key);
        }
    }
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    while (std::getline(in, line)) {
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: expected key = value, got: " + stripped);
        }
        kv.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    return config_from_kv(kv);
}

bool records_equal(const PointRecord& a, const PointRecord& b) {
    return same_double(a.snr_db, b.snr_db) && a.num_users == b.num_users &&
           a.cooperation == b.cooperation && a.trials == b.trials &&
           same_double(a.mean_psnr, b.mean_psnr) && same_double(a.std_psnr, b.std_psnr) &&
           same_double(a.mean_msssim, b.mean_msssim) &&
           same_double(a.std_msssim, b.std_msssim) && same_double(a.mean_mse, b.mean_mse) &&
           same_double(a.std_mse, b.std_mse) &&
           same_double(a.mean_effective_variance, b.mean_effective_variance) &&
           same_double(a.mean_t_ch, b.mean_t_ch);
}

bool results_equal(const SweepResult& a, const SweepResult& b) {
    if (config_line(a.config) != config_line(b.config)) return false;
    if (a.provenance.seed != b.provenance.seed ||
        a.provenance.code_version != b.provenance.code_version ||
        a.provenance.timestamp != b.provenance.timestamp) {
        return false;
    }
    if (a.records.size() != b.records.size()) return false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        if (!records_equal(a.records[i], b.records[i])) return false;
    }
    return true;
}

std::string to_csv(const SweepResult& result) {
    std::string out;
    out += kSweepMagic;
    out += "\n# config: " + config_line(result.config) + "\n";
    out += "# provenance: seed=" + std::to_string(result.provenance.seed) +
           ";version=" + result.provenance.code_version +
           ";timestamp=" + result.provenance.timestamp + "\n";
    out += kSweepHeader;
    out += "\n";
    for (const auto& r : result.records) {
        out += fmt_double(r.snr_db) + "," + std::to_string(r.num_users) + "," +
               (r.cooperation ? "1" : "0") + "," + std::to_string(r.trials) + "," +
               fmt_double(r.mean_psnr) + "," + fmt_double(r.std_psnr) + "," +
               fmt_double(r.mean_msssim) + "," + fmt_double(r.std_msssim) + "," +
               fmt_double(r.mean_mse) + "," + fmt_double(r.std_mse) + "," +
               fmt_double(r.mean_effective_variance) + "," + fmt_double(r.mean_t_ch) + "\n";
    }
    return out;
}

SweepResult sweep_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    SweepResult result;
    if (!std::getline(in, line) || trim(line) != kSweepMagic) {
        throw std::invalid_argument("sweep_from_csv: missing magic line");
    }
    bool have_header = false;
    while (std::getline(in, line)) {
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        if (stripped.rfind("# config: ", 0) == 0) {
            result.config = config_from_line(stripped.substr(10));
            continue;
        }
        if (stripped.rfind("# provenance: ", 0) == 0) {
            for (const auto& item : split(stripped.substr(14), ';')) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = item.substr(0, eq);
                const std::string value = item.substr(eq + 1);
                if (key == "seed") result.provenance.seed = parse_u64(value);
                else if (key == "version") result.provenance.code_version = value;
                else if (key == "timestamp") result.provenance.timestamp = value;
            }
            continue;
        }
        if (!have_header) {
            if (stripped != kSweepHeader) {
                throw std::invalid_argument("sweep_from_csv: unexpected header: " + stripped);
            }
            have_header = true;
            continue;
        }
        const std::vector<std::string> f = split(stripped, ',');
        if (f.size() != 12) {
            throw std::invalid_argument("sweep_from_csv: bad row: " + stripped);
        }
        PointRecord r;
        r.snr_db = parse_double(f[0]);
        r.num_users = parse_u64(f[1]);
        r.cooperation = parse_bool(f[2]);
        r.trials = parse_u64(f[3]);
        r.mean_psnr = parse_double(f[4]);
        r.std_psnr = parse_double(f[5]);
        r.mean_msssim = parse_double(f[6]);
        r.std_msssim = parse_double(f[7]);
        r.mean_mse = parse_double(f[8]);
        r.std_mse = parse_double(f[9]);
        r.mean_effective_variance = parse_double(f[10]);
        r.mean_t_ch = parse_double(f[11]);
        result.records.push_back(r);
    }
    if (!have_header) {
        throw std::invalid_argument("sweep_from_csv: missing header row");
    }
    return result;
}

std::string to_json_text(const SweepResult& result) {
    nlohmann::json j;
    j["schema"] = "coopdiff-sweep";
    j["schema_version"] = 1;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [key, value] : config_to_kv(result.config)) cfg[key] = value;
    j["config"] = cfg;
    j["provenance"] = {{"seed", result.provenance.seed},
                       {"version", result.provenance.code_version},
                       {"timestamp", result.provenance.timestamp}};
    j["records"] = nlohmann::json::array();
    for (const auto& r : result.records) j["records"].push_back(record_to_json(r));
    return j.dump(2) + "\n";
}

SweepResult sweep_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("schema", "") != "coopdiff-sweep" || j.value("schema_version", 0) != 1) {
        throw std::invalid_argument("sweep_from_json: unrecognized schema");
    }
    SweepResult result;
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& [key, value] : j.at("config").items()) {
        kv.emplace_back(key, value.get<std::string>());
    }
    result.config = config_from_kv(kv);
    result.provenance.seed = j.at("provenance").at("seed").get<std::uint64_t>();
    result.provenance.code_version = j.at("provenance").at("version").get<std::string>();
    result.provenance.timestamp = j.at("provenance").at("timestamp").get<std::string>();
    for (const auto& rec : j.at("records")) result.records.push_back(record_from_json(rec));
    return result;
}

std::string ablation_to_csv(const AblationResult& result) {
    std::string out;
    out += kAblationMagic;
    out += "\n# config: " + config_line(result.config) + "\n";
    out += "# provenance: seed=" + std::to_string(result.provenance.seed) +
           ";version=" + result.provenance.code_version +
           ";timestamp=" + result.provenance.timestamp + "\n";
    out += kAblationHeader;
    out += "\n";
    for (const auto& r : result.records) {
        out += fmt_double(r.snr_db) + "," + std::to_string(r.num_users) + "," +
               std::to_string(r.trials) + "," + fmt_double(r.mean_psnr_coop) + "," +
               fmt_double(r.mean_psnr_nocoop) + "," + fmt_double(r.mean_psnr_delta) + "," +
               fmt_double(r.std_psnr_delta) + "," +
               fmt_double(r.fraction_psnr_delta_positive) + "," +
               fmt_double(r.mean_mse_delta) + "," + fmt_double(r.mean_msssim_delta) + "\n";
    }
    return out;
}

void emit_results(const SweepResult& result, ResultFormat format, const std::string& path) {
    try {
        write_file(path, format == ResultFormat::Csv ? to_csv(result) : to_json_text(result));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error("emit_results(" + path + "): " + e.what());
    }
}

SweepResult parse_results(const std::string& path, ResultFormat format) {
    const std::string text = read_file(path);
    return format == ResultFormat::Csv ? sweep_from_csv(text) : sweep_from_json(text);
}

void emit_ablation(const AblationResult& result, ResultFormat format, const std::string& path) {
    if (format == ResultFormat::Csv) {
        write_file(path, ablation_to_csv(result));
        return;
    }
    nlohmann::json j;
    j["schema"] = "coopdiff-ablation";
    j["schema_version"] = 1;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [key, value] : config_to_kv(result.config)) cfg[key] = value;
    j["config"] = cfg;
    j["provenance"] = {{"seed", result.provenance.seed},
                       {"version", result.provenance.code_version},
                       {"timestamp", result.provenance.timestamp}};
    j["records"] = nlohmann::json::array();
    for (const auto& r : result.records) {
        j["records"].push_back({{"snr_db", r.snr_db},
                                {"num_users", r.num_users},
                                {"trials", r.trials},
                                {"mean_psnr_coop", r.mean_psnr_coop},
                                {"mean_psnr_nocoop", r.mean_psnr_nocoop},
                                {"mean_psnr_delta", r.mean_psnr_delta},
                                {"std_psnr_delta", r.std_psnr_delta},
                                {"fraction_psnr_delta_positive", r.fraction_psnr_delta_positive},
                                {"mean_mse_delta", r.mean_mse_delta},
                                {"mean_msssim_delta", r.mean_msssim_delta}});
    }
    write_file(path, j.dump(2) + "\n");
}

std::string selftest_to_csv(const std::vector<CheckRecord>& checks) {
    std::string out = "name,measured,expected,tolerance,pass\n";
    for (const auto& c : checks) {
        out += c.name + "," + fmt_double(c.measured) + "," + fmt_double(c.expected) + "," +
               fmt_double(c.tolerance) + "," + (c.pass ? "1" : "0") + "\n";
    }
    return out;
}

TrainSummary run_training(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                          const std::string& trace_csv_path) {
    cfg.validate();
    std::unique_ptr<denoise::FeatureSource> source;
    if (cfg.source == SourceKind::GaussianMixture) {
        source = std::make_unique<denoise::MixtureFeatureSource>(denoise::make_separated_mixture(
            cfg.mixture_components, cfg.feature_dim, cfg.mixture_separation, cfg.sigma0_sq));
    } else {
        source = std::make_unique<TextureFrameSource>(cfg.frame_size, cfg.frame_smoothing);
    }
    const diffusion::DiffusionSchedule schedule =
        diffusion::build_linear_schedule(cfg.schedule_steps, cfg.beta_start, cfg.beta_end);

    hybrid::HybridNoiseSpec spec;
    spec.lambda_schedule = hybrid::LambdaSchedule{cfg.lambda0, cfg.schedule_steps};
    spec.channel_source.num_relays = 0;
    if (cfg.cooperation && cfg.num_users >= 2) {
        spec.channel_source.num_relays =
            protocol::make_slot_schedule(cfg.num_users, 0, cfg.coop_subset).num_relays();
    }
    spec.channel_source.fading = cfg.fading;
    // The normalization removes the absolute noise scale, only the relative
    // relay amplification matters; unit variances keep the link set valid.
    spec.channel_source.bs_noise_variance = 1.0;
    spec.channel_source.relay_noise_variance = 1.0;
    spec.channel_source.h_floor = cfg.h_floor;

    denoise::TrainingConfig train_cfg;
    train_cfg.steps = cfg.train_steps;
    train_cfg.batch_size = cfg.batch_size;
    train_cfg.learning_rate = cfg.learning_rate;
    train_cfg.optimizer = cfg.optimizer;
    train_cfg.seed = cfg.seed;
    train_cfg.hidden_dim = cfg.hidden_dim;

    const denoise::TrainingResult result =
        denoise::train_hybrid(*source, spec, schedule, train_cfg);

    denoise::Checkpoint ckpt;
    ckpt.params = result.params;
    ckpt.schedule_steps = cfg.schedule_steps;
    ckpt.beta_start = cfg.beta_start;
    ckpt.beta_end = cfg.beta_end;
    ckpt.lambda0 = cfg.lambda0;
    ckpt.seed = cfg.seed;
    denoise::save_checkpoint(ckpt, checkpoint_path);

    if (!trace_csv_path.empty()) {
        std::string trace = "step,loss\n";
        for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
            trace += std::to_string(i + 1) + "," + fmt_double(result.loss_trace[i]) + "\n";
        }
        write_file(trace_csv_path, trace);
    }
    TrainSummary summary;
    summary.first_loss = result.loss_trace.front();
    summary.last_loss = result.loss_trace.back();
    summary.steps = result.loss_trace.size();
    return summary;
}

EvalReport evaluate_checkpoint(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                               std::size_t num_draws) {
    const denoise::Checkpoint ckpt = denoise::load_checkpoint(checkpoint_path);
    ExperimentConfig eval_cfg = cfg;
    eval_cfg.schedule_steps = ckpt.schedule_steps;
    eval_cfg.beta_start = ckpt.beta_start;
    eval_cfg.beta_end = ckpt.beta_end;
    eval_cfg.denoiser = DenoiserKind::Analytic;  // resolve without reloading
    const ResolvedExperiment exp = resolve_experiment(eval_cfg);
    if (ckpt.params.feature_dim != exp.source->dim() ||
        ckpt.params.cond_dim != exp.source->embedding_dim()) {
        throw std::invalid_argument("evaluate_checkpoint: checkpoint/source shape mismatch");
    }
    const denoise::MlpDenoiser mlp(ckpt.params);
    const denoise::AnalyticDenoiser& oracle =
        dynamic_cast<const denoise::AnalyticDenoiser&>(*exp.predictor);

    EvalReport report;
    report.mlp_mse =
        denoise::heldout_epsilon_mse(mlp, *exp.source, exp.schedule, num_draws, cfg.seed);
    report.oracle_mse =
        denoise::heldout_epsilon_mse(oracle, *exp.source, exp.schedule, num_draws, cfg.seed);
    report.excess_ratio = report.mlp_mse / report.oracle_mse - 1.0;

    // Per-timestep-band comparison.
    constexpr std::size_t kBuckets = 10;
    const std::size_t steps = exp.schedule.num_steps();
    const std::size_t per_bucket = std::max<std::size_t>(1, num_draws / kBuckets);
    RandomStream rng = derive_stream(cfg.seed, 0xB0C4u);
    std::normal_distribution<double> gaussian(0.0, 1.0);
    for (std::size_t b = 0; b < kBuckets; ++b) {
        EvalReport::Bucket bucket;
        bucket.t_lo = b * steps / kBuckets + 1;
        bucket.t_hi = (b + 1) * steps / kBuckets;
        std::uniform_int_distribution<std::size_t> uniform_t(bucket.t_lo, bucket.t_hi);
        double mlp_total = 0.0, oracle_total = 0.0;
        for (std::size_t i = 0; i < per_bucket; ++i) {
            const std::vector<double> x0 = exp.source->sample(rng);
            const denoise::SemanticEmbedding z = exp.source->embedding(x0);
            const std::size_t t = uniform_t(rng);
            std::vector<double> eps(x0.size());
            for (auto& e : eps) e = gaussian(rng);
            const diffusion::DiffusionState state =
                diffusion::forward_diffuse(x0, t, eps, exp.schedule);
            const std::vector<double> mlp_eps = mlp.predict(state.x, t, z.z);
            const std::vector<double> oracle_eps = oracle.predict(state.x, t, z.z);
            for (std::size_t k = 0; k < eps.size(); ++k) {
                mlp_total += (eps[k] - mlp_eps[k]) * (eps[k] - mlp_eps[k]);
                oracle_total += (eps[k] - oracle_eps[k]) * (eps[k] - oracle_eps[k]);
            }
        }
        const double denom =
            static_cast<double>(per_bucket) * static_cast<double>(exp.source->dim());
        bucket.mlp_mse = mlp_total / denom;
        bucket.oracle_mse = oracle_total / denom;
        report.buckets.push_back(bucket);
    }
    return report;
}

std::string eval_report_to_csv(const EvalReport& report) {
    std::string out = "t_lo,t_hi,mlp_mse,oracle_mse\n";
    out += "1," + std::to_string(report.buckets.empty() ? 0 : report.buckets.back().t_hi) + "," +
           fmt_double(report.mlp_mse) + "," + fmt_double(report.oracle_mse) + "\n";
    for (const auto& b : report.buckets) {
        out += std::to_string(b.t_lo) + "," + std::to_string(b.t_hi) + "," +
               fmt_double(b.mlp_mse) + "," + fmt_double(b.oracle_mse) + "\n";
    }
    return out;
}

}  // namespace coopdiff::harness
