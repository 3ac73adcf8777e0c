#pragma once

#include <cstddef>
#include <vector>

namespace coopdiff::metrics {

// Planar image, values[c][y][x] flattened row-major, entries in [0, MAX].
struct ImageTensor {
    std::size_t channels = 1;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    std::size_t size() const { return channels * height * width; }
    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return values[(c * height + y) * width + x];
    }
    void validate(double max_value) const;
};

double mse(const ImageTensor& a, const ImageTensor& b);

// 10 log10(max^2 / mse); identical images report cap_db.
double psnr(const ImageTensor& a, const ImageTensor& b, double max_value,
            double cap_db = 100.0);

struct MsSsimConfig {
    std::size_t num_scales = 5;
    std::vector<double> weights;  // contrast/structure exponent per scale
    double luminance_exponent = 0.1333;
    std::size_t window_size = 11;
    double window_sigma = 1.5;
    double c1 = 0.0;
    double c2 = 0.0;

    // Window 11, sigma 1.5, the usual five-scale weights, C1=(0.01 max)^2,
    // C2=(0.03 max)^2.
    static MsSsimConfig standard(double max_value);
    // Standard config with the scale count reduced until the coarsest scale
    // still fits the window; truncated weights are rescaled to keep the
    // original exponent sum.
    static MsSsimConfig auto_for(std::size_t height, std::size_t width, double max_value);

    void validate() const;
};

// Largest scale count for which min(h, w) / 2^(M-1) >= window.
std::size_t max_feasible_scales(std::size_t height, std::size_t width,
                                std::size_t window_size);

// Multi-scale structural similarity: Gaussian-window local statistics,
// 2x mean-pool between scales, luminance applied at the coarsest scale only.
double ms_ssim(const ImageTensor& a, const ImageTensor& b, const MsSsimConfig& cfg);

}  // namespace coopdiff::metrics
