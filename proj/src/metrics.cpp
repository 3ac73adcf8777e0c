#include "coopdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace coopdiff::metrics {

namespace {

constexpr double kStandardWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

void check_same_shape(const ImageTensor& a, const ImageTensor& b) {
    if (a.channels != b.channels || a.height != b.height || a.width != b.width) {
        throw std::invalid_argument("image shape mismatch");
    }
    if (a.values.size() != a.size() || b.values.size() != b.size()) {
        throw std::invalid_argument("image buffer does not match its shape");
    }
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
    std::vector<double> w(size);
    const double center = (static_cast<double>(size) - 1.0) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        const double d = static_cast<double>(i) - center;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += w[i];
    }
    for (auto& v : w) v /= total;
    return w;
}

// Symmetric (reflect-including-edge) index for out-of-range taps.
std::size_t mirror(long i, long n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return static_cast<std::size_t>(i);
}

struct Plane {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> v;

    double at(std::size_t y, std::size_t x) const { return v[y * width + x]; }
};

Plane filter_separable(const Plane& p, const std::vector<double>& w) {
    const long h = static_cast<long>(p.height);
    const long n = static_cast<long>(p.width);
    const long half = static_cast<long>(w.size()) / 2;
    Plane tmp{p.height, p.width, std::vector<double>(p.v.size())};
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < n; ++x) {
            double acc = 0.0;
            for (long k = 0; k < static_cast<long>(w.size()); ++k) {
                acc += w[static_cast<std::size_t>(k)] * p.at(static_cast<std::size_t>(y),
                                                             mirror(x + k - half, n));
            }
            tmp.v[static_cast<std::size_t>(y * n + x)] = acc;
        }
    }
    Plane out{p.height, p.width, std::vector<double>(p.v.size())};
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < n; ++x) {
            double acc = 0.0;
            for (long k = 0; k < static_cast<long>(w.size()); ++k) {
                acc += w[static_cast<std::size_t>(k)] * tmp.at(mirror(y + k - half, h),
                                                               static_cast<std::size_t>(x));
            }
            out.v[static_cast<std::size_t>(y * n + x)] = acc;
        }
    }
    return out;
}

Plane downsample2(const Plane& p) {
    Plane out{p.height / 2, p.width / 2, {}};
    out.v.resize(out.height * out.width);
    for (std::size_t y = 0; y < out.height; ++y) {
        for (std::size_t x = 0; x < out.width; ++x) {
            out.v[y * out.width + x] = 0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) +
                                               p.at(2 * y + 1, 2 * x) + p.at(2 * y + 1, 2 * x + 1));
        }
    }
    return out;
}

Plane extract_channel(const ImageTensor& img, std::size_t c) {
    Plane p{img.height, img.width, {}};
    p.v.assign(img.values.begin() + static_cast<std::ptrdiff_t>(c * img.height * img.width),
               img.values.begin() + static_cast<std::ptrdiff_t>((c + 1) * img.height * img.width));
    return p;
}

struct ScaleStats {
    double luminance = 1.0;         // mean of the per-pixel l map
    double contrast_structure = 1.0;  // mean of the per-pixel cs map
};

ScaleStats scale_stats(const Plane& a, const Plane& b, const std::vector<double>& window,
                       double c1, double c2) {
    const Plane mu_a = filter_separable(a, window);
    const Plane mu_b = filter_separable(b, window);

    Plane aa = a, bb = b, ab = a;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        aa.v[i] = a.v[i] * a.v[i];
        bb.v[i] = b.v[i] * b.v[i];
        ab.v[i] = a.v[i] * b.v[i];
    }
    const Plane e_aa = filter_separable(aa, window);
    const Plane e_bb = filter_separable(bb, window);
    const Plane e_ab = filter_separable(ab, window);

    double l_total = 0.0;
    double cs_total = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double ma = mu_a.v[i];
        const double mb = mu_b.v[i];
        const double var_a = std::max(0.0, e_aa.v[i] - ma * ma);
        const double var_b = std::max(0.0, e_bb.v[i] - mb * mb);
        const double cov = e_ab.v[i] - ma * mb;
        l_total += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs_total += (2.0 * cov + c2) / (var_a + var_b + c2);
    }
    const double n = static_cast<double>(a.v.size());
    return ScaleStats{l_total / n, cs_total / n};
}

}  // namespace

void ImageTensor::validate(double max_value) const {
    if (size() == 0) {
        throw std::invalid_argument("ImageTensor: empty shape");
    }
    if (values.size() != size()) {
        throw std::invalid_argument("ImageTensor: buffer does not match shape");
    }
    for (double v : values) {
        if (!(v >= 0.0) || !(v <= max_value)) {
            throw std::invalid_argument("ImageTensor: value outside [0, max]");
        }
    }
}

double mse(const ImageTensor& a, const ImageTensor& b) {
    check_same_shape(a, b);
    double total = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        total += d * d;
    }
    return total / static_cast<double>(a.values.size());
}

double psnr(const ImageTensor& a, const ImageTensor& b, double max_value, double cap_db) {
    if (!(max_value > 0.0)) {
        throw std::invalid_argument("psnr: max_value must be > 0");
    }
    const double err = mse(a, b);
    if (err == 0.0) return cap_db;
    return 10.0 * std::log10(max_value * max_value / err);
}

MsSsimConfig MsSsimConfig::standard(double max_value) {
    MsSsimConfig cfg;
    cfg.num_scales = 5;
    cfg.weights.assign(std::begin(kStandardWeights), std::end(kStandardWeights));
    cfg.luminance_exponent = kStandardWeights[4];
    cfg.window_size = 11;
    cfg.window_sigma = 1.5;
    cfg.c1 = (0.01 * max_value) * (0.01 * max_value);
    cfg.c2 = (0.03 * max_value) * (0.03 * max_value);
    return cfg;
}

MsSsimConfig MsSsimConfig::auto_for(std::size_t height, std::size_t width, double max_value) {
    MsSsimConfig cfg = standard(max_value);
    const std::size_t feasible = max_feasible_scales(height, width, cfg.window_size);
    if (feasible == 0) {
        throw std::invalid_argument("ms_ssim: image smaller than the window");
    }
    if (feasible >= cfg.num_scales) return cfg;
    double full_sum = 0.0;
    for (double w : cfg.weights) full_sum += w;
    cfg.num_scales = feasible;
    cfg.weights.resize(feasible);
    double prefix_sum = 0.0;
    for (double w : cfg.weights) prefix_sum += w;
    for (auto& w : cfg.weights) w *= full_sum / prefix_sum;
    cfg.luminance_exponent = cfg.weights.back();
    return cfg;
}

void MsSsimConfig::validate() const {
    if (num_scales == 0 || weights.size() != num_scales) {
        throw std::invalid_argument("MsSsimConfig: need one weight per scale");
    }
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("MsSsimConfig: negative weight");
    }
    if (window_size % 2 == 0 || window_size == 0) {
        throw std::invalid_argument("MsSsimConfig: window size must be odd");
    }
    if (!(window_sigma > 0.0) || c1 < 0.0 || c2 < 0.0) {
        throw std::invalid_argument("MsSsimConfig: bad window sigma or constants");
    }
}

std::size_t max_feasible_scales(std::size_t height, std::size_t width,
                                std::size_t window_size) {
    std::size_t dim = std::min(height, width);
    std::size_t scales = 0;
    while (dim >= window_size) {
        ++scales;
        dim /= 2;
    }
    return scales;
}

double ms_ssim(const ImageTensor& a, const ImageTensor& b, const MsSsimConfig& cfg) {
    check_same_shape(a, b);
    cfg.validate();
    const std::size_t feasible = max_feasible_scales(a.height, a.width, cfg.window_size);
    if (cfg.num_scales > feasible) {
        throw std::invalid_argument("ms_ssim: image supports at most " +
                                    std::to_string(feasible) + " scales");
    }
    const std::vector<double> window = gaussian_window(cfg.window_size, cfg.window_sigma);

    double result_total = 0.0;
    for (std::size_t c = 0; c < a.channels; ++c) {
        Plane pa = extract_channel(a, c);
        Plane pb = extract_channel(b, c);
        double channel_result = 1.0;
        for (std::size_t m = 0; m < cfg.num_scales; ++m) {
            const ScaleStats stats = scale_stats(pa, pb, window, cfg.c1, cfg.c2);
            // Fractional exponents require a non-negative base.
            const double cs = std::max(0.0, stats.contrast_structure);
            channel_result *= std::pow(cs, cfg.weights[m]);
            if (m + 1 == cfg.num_scales) {
                channel_result *= std::pow(std::max(0.0, stats.luminance),
                                           cfg.luminance_exponent);
            } else {
                pa = downsample2(pa);
                pb = downsample2(pb);
            }
        }
        result_total += channel_result;
    }
    return result_total / static_cast<double>(a.channels);
}

}  // namespace coopdiff::metrics
