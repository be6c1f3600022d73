import numpy as np
import pytest

from broadris import channel, surface

PI = np.pi
LAM = 0.1


def bs4():
    return channel.BsGeometry(4, LAM / 2, LAM)


def upa(n_y=16, n_z=16):
    return surface.RisGeometry("upa-row-interleaved", n_y, n_z, LAM / 4, LAM / 4, LAM)


def ula(n=128):
    return surface.RisGeometry("ula-interleaved", n, 1, LAM / 4, LAM / 4, LAM)


ANGLES = channel.ScenarioAngles(-PI / 3, PI / 3, PI / 3)


def test_bs_steering():
    b = channel.bs_steering(bs4(), 0.0)
    np.testing.assert_allclose(b, np.ones(4))
    two = channel.BsGeometry(2, LAM / 2, LAM)
    np.testing.assert_allclose(channel.bs_steering(two, PI / 2), [1, -1], atol=1e-12)
    rng = np.random.default_rng(0)
    for _ in range(5):
        t = rng.uniform(-PI / 2, PI / 2)
        assert np.linalg.norm(channel.bs_steering(bs4(), t)) ** 2 == pytest.approx(4)


def test_mrt_weights():
    w = channel.mrt_weights(bs4(), 0.0)
    np.testing.assert_allclose(w, np.ones(4) / 2)
    for t in (-PI / 3, 0.8):
        b = channel.bs_steering(bs4(), t)
        w = channel.mrt_weights(bs4(), t)
        assert np.linalg.norm(w) == pytest.approx(1.0)
        assert b @ w == pytest.approx(2.0)  # sqrt(M)
    m4 = channel.BsGeometry(4, LAM / 2, LAM)
    np.testing.assert_allclose(channel.mrt_weights(m4, -PI / 3),
                               np.conj(channel.bs_steering(m4, -PI / 3)) / 2, atol=1e-12)


def test_los_channel_rank_one():
    g = upa(4, 4)
    broadside = channel.ScenarioAngles(0.0, 0.0, 0.0)
    h = channel.los_channel(g, bs4(), broadside, "V", use_element_gains=False)
    np.testing.assert_allclose(h, np.ones((8, 4)))
    h = channel.los_channel(g, bs4(), ANGLES, "H")
    assert np.linalg.matrix_rank(h) == 1
    gain = channel.backhaul_gain(ANGLES)
    assert np.linalg.norm(h, "fro") ** 2 == pytest.approx(gain ** 2 * 8 * 4, rel=1e-12)


def test_correlation_ula_basics():
    g = ula(16)
    r = channel.correlation_matrix_ula(g, PI / 3, PI / 18)
    n = g.per_pol_elements
    assert r.shape == (n, n)
    np.testing.assert_allclose(np.diag(r), np.ones(n), atol=1e-14)
    np.testing.assert_allclose(r, r.conj().T, atol=1e-14)
    with pytest.raises(ValueError):
        channel.correlation_matrix_ula(g, PI / 3, PI / 18, order=1)


def test_correlation_ula_small_spread_limit():
    g = ula(8)
    r = channel.correlation_matrix_ula(g, PI / 3, 1e-9)
    k = 2 * PI / LAM
    n = g.per_pol_elements
    ramp = np.exp(1j * k * 2 * g.delta_y * np.subtract.outer(np.arange(n), np.arange(n))
                  * np.sin(PI / 3))
    np.testing.assert_allclose(r, ramp, atol=1e-9)


def test_correlation_ula_quadrature_refinement():
    g = ula(16)
    r31 = channel.correlation_matrix_ula(g, PI / 3, PI / 18, order=31)
    r62 = channel.correlation_matrix_ula(g, PI / 3, PI / 18, order=62)
    assert abs(r31[1, 0] - r62[1, 0]) <= 1e-8
    # small matrices are fully converged at the default order
    np.testing.assert_allclose(r31[:8, :8], r62[:8, :8], atol=1e-8)


def test_correlation_upa_basics():
    g = upa(4, 4)
    r = channel.correlation_matrix_upa(g, PI / 3, PI / 3, PI / 18)
    n = g.per_pol_elements
    np.testing.assert_allclose(np.diag(r), np.ones(n), atol=1e-14)
    np.testing.assert_allclose(r, r.conj().T, atol=1e-14)
    # small-spread limit reproduces the steering phase ramp
    r0 = channel.correlation_matrix_upa(g, PI / 3, PI / 3, 1e-9)
    a = surface.steering_vector(g, surface.Direction(PI / 3, PI / 3), "V")
    np.testing.assert_allclose(r0, np.outer(np.conj(a), a), atol=1e-6)


def test_correlation_upa_refined_oracle():
    g = upa(4, 4)
    r31 = channel.correlation_matrix_upa(g, PI / 3, PI / 3, PI / 18, order=31)
    r63 = channel.correlation_matrix_upa(g, PI / 3, PI / 3, PI / 18, order=63)
    rng = np.random.default_rng(1)
    for _ in range(10):
        i, j = rng.integers(8, size=2)
        assert abs(r31[i, j] - r63[i, j]) <= 1e-8


def test_correlation_positive_semidefinite():
    # the quadrature is a positively weighted Gram sum: PSD at any order
    g = ula(128)
    r = channel.correlation_matrix_ula(g, PI / 3, PI / 18, order=31)
    evals = np.linalg.eigvalsh(r)
    assert evals.min() >= -1e-10
    clipped, _ = channel.psd_clip(r)
    assert clipped.min() >= 0.0
    bad = np.eye(3) * -1.0
    with pytest.raises(ValueError):
        channel.psd_clip(bad)


def test_rician_pure_los_limit():
    g = upa(4, 4)
    r = channel.correlation_matrix_upa(g, ANGLES.aoa_azimuth, ANGLES.aoa_elevation, PI / 18)
    params = channel.RicianParams(np.inf, PI / 18, rng_seed=7)
    h = channel.rician_channel(g, bs4(), ANGLES, params, r, "V")
    np.testing.assert_allclose(h, channel.los_channel(g, bs4(), ANGLES, "V"), atol=1e-12)


def test_rician_seed_determinism():
    g = upa(4, 4)
    r = channel.correlation_matrix_upa(g, ANGLES.aoa_azimuth, ANGLES.aoa_elevation, PI / 18)
    params = channel.RicianParams(3.0, PI / 18, rng_seed=11)
    h1 = channel.rician_channel(g, bs4(), ANGLES, params, r, "H")
    h2 = channel.rician_channel(g, bs4(), ANGLES, params, r, "H")
    assert np.array_equal(h1, h2)
    hv = channel.rician_channel(g, bs4(), ANGLES, params, r, "V")
    assert not np.array_equal(h1, hv)  # polarizations draw independent streams


def test_rician_entry_power_monte_carlo():
    """kappa = 0, identity correlation: per-entry mean power is the gain product."""
    g = upa(4, 8)  # 16 per polarization
    bs = channel.BsGeometry(8, LAM / 2, LAM)
    r = np.eye(16, dtype=complex)
    total = 0.0
    count = 0
    for seed in range(800):
        params = channel.RicianParams(0.0, PI / 18, rng_seed=seed)
        h = channel.rician_channel(g, bs, ANGLES, params, r, "V")
        total += np.sum(np.abs(h) ** 2)
        count += h.size
    gain2 = channel.backhaul_gain(ANGLES) ** 2
    assert count >= 1e5
    assert total / count == pytest.approx(gain2, rel=0.02)


def test_rician_sample_covariance_matches_model():
    g = ula(64)  # 32 per polarization
    bs = channel.BsGeometry(10, LAM / 2, LAM)
    r = channel.correlation_matrix_ula(g, PI / 3, PI / 18)
    gain = channel.backhaul_gain(channel.ScenarioAngles(-PI / 3, PI / 3, 0.0))
    angles = channel.ScenarioAngles(-PI / 3, PI / 3, 0.0)
    acc = np.zeros_like(r)
    draws = 0
    for seed in range(1000):
        params = channel.RicianParams(0.0, PI / 18, rng_seed=seed)
        h = channel.rician_channel(g, bs, angles, params, r, "V") / gain
        acc += h @ h.conj().T
        draws += bs.m
    sample = acc / draws
    err = np.linalg.norm(sample - r, "fro") / np.linalg.norm(r, "fro")
    assert err <= 0.05


def test_eigen_beamformer_rank_one():
    g = upa(4, 4)
    h = channel.los_channel(g, bs4(), ANGLES, "V")
    f = channel.eigen_beamformer(h)
    assert np.linalg.norm(f) == pytest.approx(1.0)
    gain2 = channel.backhaul_gain(ANGLES) ** 2
    assert np.linalg.norm(h @ f) ** 2 == pytest.approx(gain2 * 8 * 4, rel=1e-10)


def test_eigen_beamformer_degenerate_deterministic():
    h = np.eye(2, dtype=complex)
    f1 = channel.eigen_beamformer(h)
    f2 = channel.eigen_beamformer(h)
    assert np.array_equal(f1, f2)
    assert np.linalg.norm(h @ f1) == pytest.approx(1.0)
    nz = np.flatnonzero(np.abs(f1) > 1e-8)
    assert f1[nz[0]].imag == pytest.approx(0.0, abs=1e-12)
    assert f1[nz[0]].real > 0


def test_eigen_beamformer_power_iteration_oracle():
    rng = np.random.default_rng(42)
    h = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
    f = channel.eigen_beamformer(h)
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    gram = h.conj().T @ h
    for _ in range(3000):
        x = gram @ x
        x /= np.linalg.norm(x)
    assert np.linalg.norm(h @ f) ** 2 == pytest.approx(
        float(np.real(x.conj() @ gram @ x)), rel=1e-10)


def test_eigen_beamformer_unitary_invariance():
    rng = np.random.default_rng(3)
    h = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    f1 = channel.eigen_beamformer(h)
    f2 = channel.eigen_beamformer(q @ h)
    assert np.linalg.norm(h @ f1) == pytest.approx(np.linalg.norm(q @ h @ f2), rel=1e-10)


def test_eigen_beamformer_zero_rejected():
    with pytest.raises(ValueError):
        channel.eigen_beamformer(np.zeros((3, 2)))


def test_effective_channel():
    rng = np.random.default_rng(8)
    h = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    e1 = np.array([1, 0, 0], dtype=complex)
    np.testing.assert_allclose(channel.effective_channel(h, e1), h[:, 0])
    f = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    f /= np.linalg.norm(f)
    out = channel.effective_channel(h, f)
    assert np.linalg.norm(out) ** 2 == pytest.approx(
        float(np.real(f.conj() @ h.conj().T @ h @ f)), rel=1e-12)
    with pytest.raises(ValueError):
        channel.effective_channel(h, np.ones(4))


def test_effective_los_realization():
    g = upa(4, 4)
    real = channel.effective_realization(g, bs4(), ANGLES, kind="los")
    assert real.provenance == "LoS"
    # rank-1 algebra: h = gain * sqrt(M) * a up to global phase
    gain = channel.backhaul_gain(ANGLES)
    a = surface.steering_vector(g, surface.Direction(PI / 3, PI / 3), "V")
    expect = gain * 2.0 * a
    ratio = real.h_v / expect
    np.testing.assert_allclose(np.abs(ratio), 1.0, atol=1e-10)
    np.testing.assert_allclose(ratio, ratio[0], atol=1e-10)


def test_los_bridge_flat_array_factor():
    """Effective LoS channels with a complementary pair give a flat pattern."""
    import broadris.golay as golay

    g = upa(4, 4)
    real = channel.effective_realization(g, bs4(), ANGLES, kind="los")
    p = golay.seed_pair(2)
    u, ut = golay.construct_array_pair_vertical(p.a, p.b, p.a, p.b)
    cfg = surface.ConfigPair.from_matrices(u, ut)
    gain2 = channel.backhaul_gain(ANGLES) ** 2
    expected = bs4().m * gain2 * g.total_elements
    rng = np.random.default_rng(5)
    for _ in range(10):
        obs = surface.Direction(rng.uniform(-PI / 2, PI / 2), rng.uniform(-PI / 2, PI / 2))
        af = surface.array_factor_effective(real.h_h * cfg.phi_h, real.h_v * cfg.phi_v, g, obs)
        assert af == pytest.approx(expected, rel=1e-9)


def test_realization_json_roundtrip(tmp_path):
    g = upa(4, 4)
    params = channel.RicianParams(3.0, PI / 18, rng_seed=5)
    real = channel.effective_realization(g, bs4(), ANGLES, kind="rician", params=params)
    f = tmp_path / "realization.json"
    real.save_json(f)
    back = channel.ChannelRealization.load_json(f)
    np.testing.assert_allclose(back.h_h, real.h_h, atol=0)
    np.testing.assert_allclose(back.h_v, real.h_v, atol=0)
    assert back.provenance == real.provenance
