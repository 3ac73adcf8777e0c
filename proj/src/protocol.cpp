#include "coopdiff/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coopdiff/channel.hpp"

namespace coopdiff::protocol {

void TdmaSchedule::validate() const {
    if (num_users == 0) {
        throw std::invalid_argument("TdmaSchedule: num_users must be >= 1");
    }
    if (active_user >= num_users) {
        throw std::invalid_argument("TdmaSchedule: active_user out of range");
    }
    std::vector<std::size_t> seen;
    for (std::size_t u : idle_users) {
        if (u >= num_users) {
            throw std::invalid_argument("TdmaSchedule: idle user index out of range");
        }
        if (u == active_user) {
            throw std::invalid_argument("TdmaSchedule: active user cannot be idle");
        }
        if (std::find(seen.begin(), seen.end(), u) != seen.end()) {
            throw std::invalid_argument("TdmaSchedule: duplicate idle user");
        }
        seen.push_back(u);
    }
}

TdmaSchedule make_slot_schedule(std::size_t num_users, std::size_t active_user,
                                std::size_t max_relays) {
    TdmaSchedule s;
    s.num_users = num_users;
    s.active_user = active_user;
    for (std::size_t u = 0; u < num_users; ++u) {
        if (u == active_user) continue;
        if (max_relays != 0 && s.idle_users.size() >= max_relays) break;
        s.idle_users.push_back(u);
    }
    s.validate();
    return s;
}

void CooperativeLinkSet::validate() const {
    if (!(h_floor > 0.0)) {
        throw std::invalid_argument("CooperativeLinkSet: h_floor must be > 0");
    }
    // Clamping scales the coefficient, so allow one rounding step of slack.
    const double floor_eps = h_floor * (1.0 - 1e-12);
    if (direct.magnitude() < floor_eps) {
        throw std::invalid_argument("CooperativeLinkSet: direct gain below floor");
    }
    if (bs_noise.variance < 0.0) {
        throw std::invalid_argument("CooperativeLinkSet: negative bs noise variance");
    }
    for (const auto& r : relays) {
        if (r.src_to_relay.magnitude() < floor_eps || r.relay_to_bs.magnitude() < floor_eps) {
            throw std::invalid_argument("CooperativeLinkSet: relay gain below floor");
        }
        if (r.noise.variance < 0.0) {
            throw std::invalid_argument("CooperativeLinkSet: negative relay noise variance");
        }
    }
}

ChannelCoefficient clamp_magnitude(ChannelCoefficient h, double h_floor) {
    const double mag = h.magnitude();
    if (mag >= h_floor) return h;
    if (mag == 0.0) return ChannelCoefficient{Complex{h_floor, 0.0}};
    return ChannelCoefficient{h.value * (h_floor / mag)};
}

CooperativeLinkSet LinkModel::sample(RandomStream& rng) const {
    auto draw = [&]() -> ChannelCoefficient {
        if (fading == Fading::Awgn) return ChannelCoefficient{Complex{1.0, 0.0}};
        return clamp_magnitude(channel::sample_rayleigh(rng, rayleigh_scale), h_floor);
    };
    CooperativeLinkSet links;
    links.h_floor = h_floor;
    links.direct = draw();
    links.bs_noise = NoiseSpec{bs_noise_variance};
    links.relays.reserve(num_relays);
    for (std::size_t i = 0; i < num_relays; ++i) {
        RelayLink relay;
        relay.user = i + 1;
        relay.src_to_relay = draw();
        relay.relay_to_bs = draw();
        relay.noise = NoiseSpec{relay_noise_variance};
        links.relays.push_back(relay);
    }
    links.validate();
    return links;
}

ComplexVector pre_equalize_source(const ComplexVector& x, ChannelCoefficient h_direct) {
    ComplexVector s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        s[i] = x[i] / h_direct.value;
    }
    return s;
}

ComplexVector relay_forward(const ComplexVector& y_received,
                            ChannelCoefficient h_src_to_relay,
                            ChannelCoefficient h_direct,
                            ChannelCoefficient h_relay_to_bs) {
    const Complex gain = h_direct.value / (h_src_to_relay.value * h_relay_to_bs.value);
    ComplexVector s(y_received.size());
    for (std::size_t i = 0; i < y_received.size(); ++i) {
        s[i] = gain * y_received[i];
    }
    return s;
}

std::vector<ComplexVector> receive_copies(const ComplexVector& x,
                                          const CooperativeLinkSet& links,
                                          RandomStream& rng) {
    const std::size_t n = x.size();
    const ComplexVector s_src = pre_equalize_source(x, links.direct);

    std::vector<ComplexVector> copies;
    copies.reserve(links.num_copies());
    copies.push_back(channel::apply_link(s_src, links.direct,
                                         channel::sample_awgn(rng, n, links.bs_noise)));
    for (const auto& relay : links.relays) {
        const ComplexVector overheard = channel::apply_link(
            s_src, relay.src_to_relay, channel::sample_awgn(rng, n, relay.noise));
        const ComplexVector forwarded =
            relay_forward(overheard, relay.src_to_relay, links.direct, relay.relay_to_bs);
        copies.push_back(channel::apply_link(
            forwarded, relay.relay_to_bs, channel::sample_awgn(rng, n, links.bs_noise)));
    }
    return copies;
}

AggregatedObservation aggregate(const std::vector<ComplexVector>& copies,
                                const CooperativeLinkSet* links) {
    if (copies.empty()) {
        throw std::invalid_argument("aggregate: no copies");
    }
    const std::size_t n = copies.front().size();
    for (const auto& c : copies) {
        if (c.size() != n) {
            throw std::invalid_argument("aggregate: copies differ in length");
        }
    }
    const std::size_t m = copies.size();

    AggregatedObservation obs;
    obs.num_copies = m;
    obs.x_hat.assign(n, Complex{0.0, 0.0});
    for (const auto& c : copies) {
        for (std::size_t i = 0; i < n; ++i) obs.x_hat[i] += c[i];
    }
    for (auto& s : obs.x_hat) s /= static_cast<double>(m);

    if (links != nullptr) {
        if (links->num_copies() != m) {
            throw std::invalid_argument("aggregate: copy count does not match link set");
        }
        obs.effective_variance = effective_noise_variance(*links);
        return obs;
    }
    if (m < 2) {
        // One copy leaves no degrees of freedom to estimate from.
        obs.effective_variance = 0.0;
        return obs;
    }
    // Cross-copy scatter estimates the average per-copy noise variance; the
    // aggregate noise variance is that divided by the copy count.
    double scatter = 0.0;
    for (const auto& c : copies) {
        for (std::size_t i = 0; i < n; ++i) {
            scatter += std::norm(c[i] - obs.x_hat[i]);
        }
    }
    const double per_copy = scatter / (static_cast<double>(n) * static_cast<double>(m - 1));
    obs.effective_variance = per_copy / static_cast<double>(m);
    return obs;
}

double effective_noise_variance(const CooperativeLinkSet& links) {
    links.validate();
    const double s0 = links.bs_noise.variance;
    const double direct_power = links.direct.power();
    double total = s0;
    for (const auto& relay : links.relays) {
        total += direct_power / relay.src_to_relay.power() * relay.noise.variance + s0;
    }
    const double m = static_cast<double>(links.num_copies());
    return total / (m * m);
}

AggregatedObservation transmit(const ComplexVector& x, const CooperativeLinkSet& links,
                               RandomStream& rng) {
    return aggregate(receive_copies(x, links, rng), &links);
}

}  // namespace coopdiff::protocol
