#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <doctest.h>

#include "coopdiff/metrics.hpp"
#include "coopdiff/rng.hpp"

using namespace coopdiff;
using namespace coopdiff::metrics;

namespace {

ImageTensor random_texture(std::size_t h, std::size_t w, std::uint64_t seed, double spread) {
    RandomStream rng = derive_stream(seed, 0x494Du);
    std::normal_distribution<double> g(0.0, 1.0);
    ImageTensor img{1, h, w, std::vector<double>(h * w)};
    // Correlated field: running mean of white noise.
    double carry = 0.0;
    for (auto& p : img.values) {
        carry = 0.8 * carry + 0.2 * g(rng);
        p = std::clamp(0.5 + spread * carry, 0.0, 1.0);
    }
    return img;
}

}  // namespace

TEST_CASE("mse over all entries") {
    const ImageTensor a{1, 1, 2, {0.0, 0.0}};
    const ImageTensor b{1, 1, 2, {1.0, 3.0}};
    CHECK(mse(a, a) == 0.0);
    CHECK(mse(a, b) == doctest::Approx(5.0));

    const ImageTensor zeros{2, 2, 2, std::vector<double>(8, 0.0)};
    const ImageTensor ones{2, 2, 2, std::vector<double>(8, 1.0)};
    CHECK(mse(zeros, ones) == doctest::Approx(1.0));

    CHECK_THROWS_AS(mse(a, zeros), std::invalid_argument);
    const ImageTensor broken{1, 2, 2, {1.0}};
    CHECK_THROWS_AS(mse(broken, broken), std::invalid_argument);
}

TEST_CASE("psnr values and the zero-error cap") {
    const ImageTensor a{1, 1, 2, {0.0, 0.0}};
    CHECK(psnr(a, a, 255.0) == 100.0);

    const ImageTensor b{1, 1, 2, {1.0, 1.0}};  // mse = 1
    CHECK(psnr(a, b, 255.0) == doctest::Approx(48.1308).epsilon(1e-4));

    const ImageTensor c{1, 1, 2, {0.1, 0.1}};  // mse = 0.01
    CHECK(psnr(a, c, 1.0) == doctest::Approx(20.0).epsilon(1e-9));

    CHECK_THROWS_AS(psnr(a, b, 0.0), std::invalid_argument);
}

TEST_CASE("psnr decreases strictly as mse grows") {
    RandomStream rng = derive_stream(3, 0x505Eu);
    std::uniform_real_distribution<double> u(1e-9, 1.0);
    for (int i = 0; i < 1000; ++i) {
        double m1 = u(rng), m2 = u(rng);
        if (m1 == m2) continue;
        if (m1 > m2) std::swap(m1, m2);
        const ImageTensor base{1, 1, 1, {0.0}};
        const ImageTensor off1{1, 1, 1, {std::sqrt(m1)}};
        const ImageTensor off2{1, 1, 1, {std::sqrt(m2)}};
        CHECK(psnr(base, off1, 1.0) > psnr(base, off2, 1.0));
    }
}

TEST_CASE("image validation enforces the value range") {
    ImageTensor img{1, 2, 2, {0.0, 0.5, 1.0, 0.25}};
    img.validate(1.0);
    img.values[2] = 1.5;
    CHECK_THROWS_AS(img.validate(1.0), std::invalid_argument);
    img.values[2] = -0.1;
    CHECK_THROWS_AS(img.validate(1.0), std::invalid_argument);
    CHECK_THROWS_AS((ImageTensor{1, 0, 4, {}}).validate(1.0), std::invalid_argument);
}

TEST_CASE("ms-ssim equals one for identical images") {
    const ImageTensor img = random_texture(32, 32, 7, 0.2);
    const MsSsimConfig cfg = MsSsimConfig::auto_for(32, 32, 1.0);
    CHECK(ms_ssim(img, img, cfg) == 1.0);
}

TEST_CASE("ms-ssim is symmetric and bounded") {
    const ImageTensor a = random_texture(32, 32, 11, 0.2);
    const ImageTensor b = random_texture(32, 32, 12, 0.2);
    const MsSsimConfig cfg = MsSsimConfig::auto_for(32, 32, 1.0);
    const double ab = ms_ssim(a, b, cfg);
    const double ba = ms_ssim(b, a, cfg);
    CHECK(ab == ba);
    CHECK(std::abs(ab) <= 1.0);
}

TEST_CASE("heavy noise drives ms-ssim below one half") {
    const ImageTensor clean = random_texture(64, 64, 13, 0.15);
    ImageTensor noisy = clean;
    RandomStream rng = derive_stream(14, 0x4E4Fu);
    std::normal_distribution<double> g(0.0, 0.25);
    for (auto& p : noisy.values) p = std::clamp(p + g(rng), 0.0, 1.0);
    const MsSsimConfig cfg = MsSsimConfig::auto_for(64, 64, 1.0);
    CHECK(ms_ssim(clean, noisy, cfg) < 0.5);
}

TEST_CASE("scale feasibility and the auto-reduced configuration") {
    CHECK(max_feasible_scales(32, 32, 11) == 2);
    CHECK(max_feasible_scales(176, 176, 11) == 5);
    CHECK(max_feasible_scales(8, 8, 11) == 0);

    const MsSsimConfig std_cfg = MsSsimConfig::standard(1.0);
    CHECK(std_cfg.num_scales == 5);

    const MsSsimConfig small = MsSsimConfig::auto_for(32, 32, 1.0);
    CHECK(small.num_scales == 2);
    double truncated_sum = 0.0;
    for (double w : small.weights) truncated_sum += w;
    double full_sum = 0.0;
    for (double w : std_cfg.weights) full_sum += w;
    CHECK(truncated_sum == doctest::Approx(full_sum).epsilon(1e-12));

    const ImageTensor img = random_texture(32, 32, 15, 0.2);
    try {
        ms_ssim(img, img, std_cfg);
        FAIL("expected an invalid-parameter error");
    } catch (const std::invalid_argument& e) {
        // The error names the largest feasible scale count.
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("ms-ssim depends on content, not absolute position") {
    const ImageTensor a = random_texture(40, 40, 16, 0.2);
    const ImageTensor b = random_texture(40, 40, 17, 0.2);
    const auto crop = [](const ImageTensor& src, std::size_t oy, std::size_t ox) {
        ImageTensor out{1, 32, 32, std::vector<double>(32 * 32)};
        for (std::size_t y = 0; y < 32; ++y) {
            for (std::size_t x = 0; x < 32; ++x) {
                out.values[y * 32 + x] = src.at(0, y + oy, x + ox);
            }
        }
        return out;
    };
    const MsSsimConfig cfg = MsSsimConfig::auto_for(32, 32, 1.0);
    // Shift both frames together; interior crops holding the same content
    // must score identically.
    const auto shift = [](const ImageTensor& src) {
        ImageTensor out{1, 40, 40, std::vector<double>(40 * 40, 0.5)};
        for (std::size_t y = 0; y + 1 < 40; ++y) {
            for (std::size_t x = 0; x + 1 < 40; ++x) {
                out.values[(y + 1) * 40 + (x + 1)] = src.at(0, y, x);
            }
        }
        return out;
    };
    const double at_origin = ms_ssim(crop(a, 2, 2), crop(b, 2, 2), cfg);
    const double shifted = ms_ssim(crop(shift(a), 3, 3), crop(shift(b), 3, 3), cfg);
    CHECK(at_origin == shifted);
    CHECK(at_origin != 1.0);
}
