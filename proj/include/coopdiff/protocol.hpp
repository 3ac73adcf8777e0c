#pragma once

#include <cstddef>
#include <vector>

#include "coopdiff/channel.hpp"
#include "coopdiff/rng.hpp"

namespace coopdiff::protocol {

using channel::ChannelCoefficient;
using channel::Complex;
using channel::ComplexVector;
using channel::NoiseSpec;

// One slot assignment: the active source and the idle users that overhear it.
struct TdmaSchedule {
    std::size_t num_users = 1;
    std::size_t active_user = 0;
    std::vector<std::size_t> idle_users;

    std::size_t num_relays() const { return idle_users.size(); }
    void validate() const;
};

// Builds the schedule for slot `active_user`; all other users are idle
// relays unless max_relays caps the subset (0 = no cap).
TdmaSchedule make_slot_schedule(std::size_t num_users, std::size_t active_user,
                                std::size_t max_relays = 0);

// Channel realization of one relay path: source -> relay -> base station.
struct RelayLink {
    std::size_t user = 0;
    ChannelCoefficient src_to_relay;  // first hop
    ChannelCoefficient relay_to_bs;   // second hop
    NoiseSpec noise;                  // relay receive noise
};

// All gains and noise specs active during one slot. Coefficient magnitudes
// are clamped to h_floor at sampling time so channel inversion stays bounded.
struct CooperativeLinkSet {
    ChannelCoefficient direct;
    std::vector<RelayLink> relays;
    NoiseSpec bs_noise;  // applies independently to every received copy
    double h_floor = 0.05;

    std::size_t num_copies() const { return relays.size() + 1; }
    void validate() const;
};

enum class Fading { Awgn, Rayleigh };

// I.i.d. link sampler. Awgn mode fixes all gains to 1.
struct LinkModel {
    std::size_t num_relays = 0;
    Fading fading = Fading::Rayleigh;
    double rayleigh_scale = 1.0;
    double bs_noise_variance = 0.0;
    double relay_noise_variance = 0.0;
    double h_floor = 0.05;

    CooperativeLinkSet sample(RandomStream& rng) const;
};

// Normalized sum of the received copies together with its residual-noise
// accounting.
struct AggregatedObservation {
    ComplexVector x_hat;
    double effective_variance = 0.0;  // per-symbol variance of x_hat - x
    std::size_t num_copies = 1;
};

// Scales h up to the floor magnitude, preserving phase.
ChannelCoefficient clamp_magnitude(ChannelCoefficient h, double h_floor);

// Channel-inversion pre-equalization: x / h, so the direct receive path
// sees the unfaded signal.
ComplexVector pre_equalize_source(const ComplexVector& x, ChannelCoefficient h_direct);

// Normalize-and-forward: undo the first hop, pre-equalize the second, so a
// noiseless overheard copy arrives at the base station equal to x.
ComplexVector relay_forward(const ComplexVector& y_received,
                            ChannelCoefficient h_src_to_relay,
                            ChannelCoefficient h_direct,
                            ChannelCoefficient h_relay_to_bs);

// Runs the full slot: source pre-equalization, direct reception, and every
// relay chain. Returns num_copies vectors, each x plus independent noise.
std::vector<ComplexVector> receive_copies(const ComplexVector& x,
                                          const CooperativeLinkSet& links,
                                          RandomStream& rng);

// Mean of the copies. Residual variance comes from the closed form when the
// generating link set is supplied, otherwise from the cross-copy estimator
// (0 when a single copy leaves no degrees of freedom).
AggregatedObservation aggregate(const std::vector<ComplexVector>& copies,
                                const CooperativeLinkSet* links = nullptr);

// Per-symbol variance of the aggregate residual noise:
//   (1/(R+1)^2) * [ s0 + sum_i ( |h_direct|^2/|h_sr,i|^2 * s_i + s0 ) ].
double effective_noise_variance(const CooperativeLinkSet& links);

// receive_copies + aggregate with the analytic variance attached.
AggregatedObservation transmit(const ComplexVector& x, const CooperativeLinkSet& links,
                               RandomStream& rng);

}  // namespace coopdiff::protocol
