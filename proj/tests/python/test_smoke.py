"""Smoke tests for the python bindings; runs with plain python, no test framework."""

import math
import sys


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    import coopdiff as cd

    # Schedule tables.
    sched = cd.build_linear_schedule(2, 0.1, 0.2)
    approx(sched.alpha_bar_at(1), 0.9, 1e-12)
    approx(sched.alpha_bar_at(2), 0.72, 1e-12)

    full = cd.build_linear_schedule(1000, 1e-4, 0.02)
    assert full.alpha_bar_at(1000) < 1e-4

    # Channel-noise to timestep matching.
    match = cd.match_channel_timestep(0.3, sched)
    assert match.t_ch == 2
    match = cd.match_channel_timestep(1.0, full)
    approx(match.alpha_bar, 0.5, 0.01)

    # Effective variance closed form: one relay, unit gains, unit variances.
    links = cd.CooperativeLinkSet()
    links.direct = cd.ChannelCoefficient(1.0 + 0.0j)
    links.bs_noise = cd.NoiseSpec(1.0)
    relay = cd.RelayLink()
    relay.user = 1
    relay.src_to_relay = cd.ChannelCoefficient(1.0 + 0.0j)
    relay.relay_to_bs = cd.ChannelCoefficient(1.0 + 0.0j)
    relay.noise = cd.NoiseSpec(1.0)
    links.relays = [relay]
    approx(cd.effective_noise_variance(links), 0.75, 1e-12)

    # Hybrid-noise mixing identities.
    ch, df = [1.0, -2.0], [0.5, 0.25]
    assert cd.mix_noise(ch, df, 0.0) == df
    assert cd.mix_noise(ch, df, 1.0) == ch
    approx(cd.lambda_at(500, cd.LambdaSchedule(0.8, 1000)), 0.4, 1e-12)

    # Metrics.
    a = cd.ImageTensor(1, 1, 2, [0.0, 0.0])
    b = cd.ImageTensor(1, 1, 2, [1.0, 1.0])
    approx(cd.mse(a, b), 1.0, 1e-12)
    approx(cd.psnr(a, b, 255.0), 48.1308, 1e-3)

    # Semantic embedding of a well-separated mixture (components at +-4).
    src = cd.make_separated_mixture(2, 4, 8.0, 1.0)
    z = cd.extract_semantic([4.0, 0.0, 0.0, 0.0], src)
    assert z.z[1] > 0.99
    z = cd.extract_semantic([-4.0, 0.0, 0.0, 0.0], src)
    assert z.z[0] > 0.99

    # End-to-end reconstruction shrinks the observation error.
    dim = 16
    gauss = cd.make_separated_mixture(1, dim, 0.0, 1.0)
    den = cd.AnalyticDenoiser(gauss, full)
    rng = cd.derive_stream(5, [1])
    obs_err = rec_err = 0.0
    for i in range(200):
        x0 = gauss.sample(rng)
        nz = cd.unpack_features(cd.sample_awgn(rng, dim // 2, cd.NoiseSpec(2.0)))
        x_hat = [u + v for u, v in zip(x0, nz)]
        rec = cd.reconstruct_features(
            x_hat, 1.0, den, [1.0], full, cd.derive_stream(6, [i]), cd.ReverseMode.Mean
        )
        obs_err += sum((u - v) ** 2 for u, v in zip(x0, x_hat))
        rec_err += sum((u - v) ** 2 for u, v in zip(x0, rec.x0_hat))
    assert rec_err < 0.8 * obs_err, (rec_err, obs_err)

    # Deterministic sweep through the harness bindings.
    cfg = cd.ExperimentConfig()
    cfg.seed = 12
    cfg.num_users = 4
    cfg.snr_db_list = [0.0, 10.0]
    cfg.feature_dim = 8
    cfg.trials = 5
    first = cd.run_snr_sweep(cfg)
    second = cd.run_snr_sweep(cfg)
    assert cd.sweep_to_csv(first) == cd.sweep_to_csv(second)
    assert len(first.records) == 2
    assert first.records[1].mean_mse < first.records[0].mean_mse

    print("python smoke tests passed")


if __name__ == "__main__":
    sys.exit(main())
