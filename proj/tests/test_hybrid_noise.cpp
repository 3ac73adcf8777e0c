#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "coopdiff/hybrid_noise.hpp"

using namespace coopdiff;
using namespace coopdiff::hybrid;

namespace {

// Kolmogorov-Smirnov distance to the standard normal CDF.
double ks_statistic(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-samples[i] / std::sqrt(2.0));
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        worst = std::max({worst, std::abs(cdf - lo), std::abs(cdf - hi)});
    }
    return worst;
}

}  // namespace

TEST_CASE("lambda schedule decays linearly to zero") {
    const LambdaSchedule sched{0.8, 1000};
    CHECK(lambda_at(1000, sched) == 0.0);
    CHECK(lambda_at(500, sched) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(lambda_at(1, sched) == doctest::Approx(0.8 * (1.0 - 1.0 / 1000.0)));

    const LambdaSchedule off{0.0, 1000};
    for (std::size_t t : {1ul, 250ul, 1000ul}) CHECK(lambda_at(t, off) == 0.0);

    double previous = 1.0;
    for (std::size_t t = 1; t <= 1000; ++t) {
        const double value = lambda_at(t, sched);
        CHECK(value <= previous);
        previous = value;
    }
    CHECK_THROWS_AS(lambda_at(0, sched), std::invalid_argument);
    CHECK_THROWS_AS(lambda_at(1001, sched), std::invalid_argument);
    CHECK_THROWS_AS(lambda_at(1, LambdaSchedule{1.5, 10}), std::invalid_argument);
}

TEST_CASE("mix_noise boundaries are bitwise exact") {
    const std::vector<double> ch = {0.25, -1.5, 3.0};
    const std::vector<double> df = {1.0, 2.0, -0.5};
    CHECK(mix_noise(ch, df, 0.0) == df);
    CHECK(mix_noise(ch, df, 1.0) == ch);
    CHECK_THROWS_AS(mix_noise(ch, df, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(mix_noise(ch, df, 1.1), std::invalid_argument);
    CHECK_THROWS_AS(mix_noise(ch, std::vector<double>(2), 0.5), std::invalid_argument);
}

TEST_CASE("mix_noise preserves unit variance and zero mean") {
    RandomStream rng = derive_stream(17, 1);
    std::normal_distribution<double> g(0.0, 1.0);
    constexpr std::size_t kComponents = 1000000;
    std::vector<double> ch(kComponents), df(kComponents);
    for (auto& v : ch) v = g(rng);
    for (auto& v : df) v = g(rng);

    for (double lambda : {0.3, 0.6, 0.9}) {
        const std::vector<double> mixed = mix_noise(ch, df, lambda);
        double mean = 0.0, second = 0.0;
        for (double v : mixed) {
            mean += v;
            second += v * v;
        }
        mean /= kComponents;
        second /= kComponents;
        const double variance = second - mean * mean;
        CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(kComponents)));
        CHECK(variance > 0.99);
        CHECK(variance < 1.01);
    }
}

TEST_CASE("normalized channel noise has unit per-component variance") {
    RandomStream rng = derive_stream(17, 2);
    protocol::LinkModel model;
    model.bs_noise_variance = 2.5;
    model.relay_noise_variance = 1.0;
    for (std::size_t relays : {0ul, 3ul}) {
        model.num_relays = relays;
        const protocol::CooperativeLinkSet links = model.sample(rng);
        const NormalizedChannelNoise noise = normalize_channel_noise(links, rng, 1000000);
        REQUIRE_FALSE(noise.degenerate);
        REQUIRE(noise.values.size() == 1000000);
        double mean = 0.0, second = 0.0;
        for (double v : noise.values) {
            mean += v;
            second += v * v;
        }
        mean /= static_cast<double>(noise.values.size());
        second /= static_cast<double>(noise.values.size());
        const double variance = second - mean * mean;
        CHECK(variance > 0.99);
        CHECK(variance < 1.01);
    }
}

TEST_CASE("zero-variance channels are flagged degenerate") {
    protocol::LinkModel model;
    model.num_relays = 1;
    model.bs_noise_variance = 0.0;
    model.relay_noise_variance = 0.0;
    RandomStream rng = derive_stream(17, 3);
    const protocol::CooperativeLinkSet links = model.sample(rng);
    const NormalizedChannelNoise noise = normalize_channel_noise(links, rng, 64);
    CHECK(noise.degenerate);
    for (double v : noise.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(normalize_channel_noise(links, rng, 0), std::invalid_argument);
}

TEST_CASE("direct-link noise normalizes to an exact standard normal") {
    protocol::LinkModel model;
    model.num_relays = 0;
    model.bs_noise_variance = 3.7;
    RandomStream rng = derive_stream(17, 4);
    const protocol::CooperativeLinkSet links = model.sample(rng);
    const NormalizedChannelNoise noise = normalize_channel_noise(links, rng, 100000);
    // 1% KS critical value for n = 1e5.
    const double critical = 1.628 / std::sqrt(100000.0);
    CHECK(ks_statistic(noise.values) < critical);
}

TEST_CASE("odd-length requests truncate the trailing component") {
    protocol::LinkModel model;
    model.bs_noise_variance = 1.0;
    RandomStream rng = derive_stream(17, 5);
    const protocol::CooperativeLinkSet links = model.sample(rng);
    const NormalizedChannelNoise noise = normalize_channel_noise(links, rng, 7);
    CHECK(noise.values.size() == 7);
}
