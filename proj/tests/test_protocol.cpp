#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "coopdiff/protocol.hpp"

using namespace coopdiff;
using namespace coopdiff::protocol;
using coopdiff::channel::Complex;
using coopdiff::channel::ComplexVector;
using coopdiff::channel::NoiseSpec;

namespace {

CooperativeLinkSet unit_links(std::size_t relays, double variance) {
    CooperativeLinkSet links;
    links.direct = ChannelCoefficient{{1.0, 0.0}};
    links.bs_noise = NoiseSpec{variance};
    for (std::size_t i = 0; i < relays; ++i) {
        links.relays.push_back({i + 1, ChannelCoefficient{{1.0, 0.0}},
                                ChannelCoefficient{{1.0, 0.0}}, NoiseSpec{variance}});
    }
    return links;
}

}  // namespace

TEST_CASE("tdma schedule validation") {
    CHECK_THROWS_AS((TdmaSchedule{0, 0, {}}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((TdmaSchedule{4, 4, {}}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((TdmaSchedule{4, 0, {0}}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((TdmaSchedule{4, 0, {1, 1}}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((TdmaSchedule{4, 0, {5}}).validate(), std::invalid_argument);

    const TdmaSchedule full = make_slot_schedule(5, 2);
    CHECK(full.num_relays() == 4);
    const TdmaSchedule capped = make_slot_schedule(5, 2, 2);
    CHECK(capped.num_relays() == 2);
    CHECK(capped.idle_users == std::vector<std::size_t>{0, 1});
}

TEST_CASE("magnitude floor clamps weak links and preserves phase") {
    const ChannelCoefficient weak{Complex{0.003, -0.004}};
    const ChannelCoefficient clamped = clamp_magnitude(weak, 0.05);
    CHECK(clamped.magnitude() == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(std::arg(clamped.value) == doctest::Approx(std::arg(weak.value)).epsilon(1e-12));

    const ChannelCoefficient strong{Complex{0.3, 0.4}};
    CHECK(clamp_magnitude(strong, 0.05).value == strong.value);
    CHECK(clamp_magnitude(ChannelCoefficient{{0.0, 0.0}}, 0.05).magnitude() ==
          doctest::Approx(0.05));
}

TEST_CASE("link model sampling respects the floor") {
    LinkModel model;
    model.num_relays = 6;
    model.bs_noise_variance = 1.0;
    model.relay_noise_variance = 1.0;
    model.h_floor = 0.05;
    RandomStream rng = derive_stream(3, 10);
    for (int i = 0; i < 1000; ++i) {
        const CooperativeLinkSet links = model.sample(rng);
        CHECK(links.direct.magnitude() >= 0.05 * (1.0 - 1e-12));
        for (const auto& r : links.relays) {
            CHECK(r.src_to_relay.magnitude() >= 0.05 * (1.0 - 1e-12));
            CHECK(r.relay_to_bs.magnitude() >= 0.05 * (1.0 - 1e-12));
        }
    }
}

TEST_CASE("pre-equalization inverts the direct channel") {
    const ComplexVector x = {{1.0, 0.0}};
    CHECK(pre_equalize_source(x, ChannelCoefficient{{1.0, 0.0}})[0] == Complex{1.0, 0.0});
    CHECK(pre_equalize_source(x, ChannelCoefficient{{0.5, 0.0}})[0].real() ==
          doctest::Approx(2.0));

    RandomStream rng = derive_stream(5, 11);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        const ChannelCoefficient h =
            clamp_magnitude(ChannelCoefficient{{g(rng), g(rng)}}, 0.05);
        ComplexVector v(4);
        for (auto& s : v) s = Complex{g(rng), g(rng)};
        const ComplexVector zero(4, Complex{0.0, 0.0});
        const ComplexVector round = channel::apply_link(pre_equalize_source(v, h), h, zero);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(std::abs(round[i] - v[i]) < 1e-10 * (1.0 + std::abs(v[i])));
        }
    }
}

TEST_CASE("relay forwarding aligns the copy with the source feature") {
    const ComplexVector x = {{0.7, -0.3}, {1.2, 0.4}};
    SUBCASE("all-unit channels") {
        const ComplexVector out = relay_forward(x, ChannelCoefficient{}, ChannelCoefficient{},
                                                ChannelCoefficient{});
        CHECK(out[0] == x[0]);
        CHECK(out[1] == x[1]);
    }
    SUBCASE("first-hop gain compensated") {
        ComplexVector heard = x;
        for (auto& s : heard) s *= 0.5;  // h_src_to_relay = 0.5, noiseless
        const ComplexVector out = relay_forward(heard, ChannelCoefficient{{0.5, 0.0}},
                                                ChannelCoefficient{}, ChannelCoefficient{});
        CHECK(std::abs(out[0] - x[0]) < 1e-12);
        CHECK(std::abs(out[1] - x[1]) < 1e-12);
    }
    SUBCASE("noiseless chain composes to the identity at the receiver") {
        RandomStream rng = derive_stream(5, 12);
        std::normal_distribution<double> g(0.0, 1.0);
        for (int rep = 0; rep < 50; ++rep) {
            const auto coeff = [&] {
                return clamp_magnitude(ChannelCoefficient{{g(rng), g(rng)}}, 0.05);
            };
            const ChannelCoefficient h_direct = coeff(), h_sr = coeff(), h_rb = coeff();
            const ComplexVector zero(2, Complex{0.0, 0.0});
            const ComplexVector s_src = pre_equalize_source(x, h_direct);
            const ComplexVector heard = channel::apply_link(s_src, h_sr, zero);
            const ComplexVector forwarded = relay_forward(heard, h_sr, h_direct, h_rb);
            const ComplexVector received = channel::apply_link(forwarded, h_rb, zero);
            for (std::size_t i = 0; i < x.size(); ++i) {
                CHECK(std::abs(received[i] - x[i]) < 1e-10 * (1.0 + std::abs(x[i])));
            }
        }
    }
}

TEST_CASE("receive_copies covers the noiseless and single-copy cases") {
    const ComplexVector x = {{0.4, 0.1}, {-1.0, 2.0}};
    RandomStream rng = derive_stream(5, 13);

    const CooperativeLinkSet noiseless = unit_links(2, 0.0);
    const auto copies = receive_copies(x, noiseless, rng);
    REQUIRE(copies.size() == 3);
    for (const auto& copy : copies) {
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(copy[i] == x[i]);
    }

    const CooperativeLinkSet direct_only = unit_links(0, 1.0);
    CHECK(receive_copies(x, direct_only, rng).size() == 1);
}

TEST_CASE("relay copy variance doubles with unit gains and equal noise") {
    const double sigma_sq = 0.8;
    const CooperativeLinkSet links = unit_links(1, sigma_sq);
    RandomStream rng = derive_stream(5, 14);
    const ComplexVector x(100000, Complex{0.0, 0.0});
    const auto copies = receive_copies(x, links, rng);
    double direct_var = 0.0, relay_var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        direct_var += std::norm(copies[0][i]);
        relay_var += std::norm(copies[1][i]);
    }
    direct_var /= static_cast<double>(x.size());
    relay_var /= static_cast<double>(x.size());
    CHECK(direct_var == doctest::Approx(sigma_sq).epsilon(0.03));
    CHECK(relay_var == doctest::Approx(2.0 * sigma_sq).epsilon(0.03));
}

TEST_CASE("aggregate normalizes and accounts for noise") {
    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);

    const ComplexVector x = {{1.0, 2.0}, {3.0, -1.0}};
    SUBCASE("single copy passes through") {
        const AggregatedObservation obs = aggregate({x});
        CHECK(obs.num_copies == 1);
        CHECK(obs.x_hat == x);
        CHECK(obs.effective_variance == 0.0);
    }
    SUBCASE("identical copies average to themselves") {
        const AggregatedObservation obs = aggregate({x, x, x});
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::abs(obs.x_hat[i] - x[i]) < 1e-15);
        }
    }
    SUBCASE("two noisy copies estimate half the per-copy variance") {
        RandomStream rng = derive_stream(5, 15);
        const ComplexVector clean(200000, Complex{1.0, 0.0});
        const auto noisy = [&] {
            return channel::apply_link(clean, ChannelCoefficient{},
                                       channel::sample_awgn(rng, clean.size(), NoiseSpec{1.0}));
        };
        const AggregatedObservation obs = aggregate({noisy(), noisy()});
        CHECK(obs.effective_variance == doctest::Approx(0.5).epsilon(0.03));
    }
    SUBCASE("length and copy-count mismatches are rejected") {
        CHECK_THROWS_AS(aggregate({x, ComplexVector(3)}), std::invalid_argument);
        const CooperativeLinkSet links = unit_links(3, 1.0);
        CHECK_THROWS_AS(aggregate({x, x}, &links), std::invalid_argument);
    }
}

TEST_CASE("effective noise variance closed form") {
    CHECK(effective_noise_variance(unit_links(0, 1.0)) == doctest::Approx(1.0));
    // R=1, all unit gains, unit variances: (1 + (1 + 1)) / 4.
    CHECK(effective_noise_variance(unit_links(1, 1.0)) == doctest::Approx(0.75));
}

TEST_CASE("cooperation benefit with unit gains is sigma^2 (2R+1)/(R+1)^2") {
    const double sigma_sq = 1.7;
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t relays = 0; relays <= 8; ++relays) {
        const double measured = effective_noise_variance(unit_links(relays, sigma_sq));
        const double m = static_cast<double>(relays + 1);
        const double expected = sigma_sq * (2.0 * relays + 1.0) / (m * m);
        CHECK(measured == doctest::Approx(expected).epsilon(1e-12));
        CHECK(measured < previous);
        previous = measured;
    }
}

TEST_CASE("formula matches Monte-Carlo variance over random link sets") {
    RandomStream rng = derive_stream(9, 16);
    LinkModel model;
    model.bs_noise_variance = 1.0;
    model.relay_noise_variance = 1.0;
    for (std::size_t relays : {0ul, 1ul, 3ul, 7ul}) {
        model.num_relays = relays;
        const CooperativeLinkSet links = model.sample(rng);
        const double predicted = effective_noise_variance(links);
        const ComplexVector x(100000, Complex{0.5, -0.5});
        const AggregatedObservation obs = transmit(x, links, rng);
        double residual_second = 0.0;
        Complex residual_mean{0.0, 0.0};
        for (std::size_t i = 0; i < x.size(); ++i) {
            const Complex r = obs.x_hat[i] - x[i];
            residual_second += std::norm(r);
            residual_mean += r;
        }
        const double n = static_cast<double>(x.size());
        residual_mean /= n;
        CHECK(residual_second / n == doctest::Approx(predicted).epsilon(0.02));
        // Aggregation is unbiased: the residual mean vanishes within 3 SE.
        const double se = std::sqrt(predicted / (2.0 * n));
        CHECK(std::abs(residual_mean.real()) < 3.0 * se);
        CHECK(std::abs(residual_mean.imag()) < 3.0 * se);
        CHECK(obs.effective_variance == doctest::Approx(predicted));
    }
}
