import numpy as np
import pytest

from broadris import channel, evaluate, golay, optimizer, surface

PI = np.pi
LAM = 0.1


def upa(n_y=16, n_z=16):
    return surface.RisGeometry("upa-row-interleaved", n_y, n_z, LAM / 4, LAM / 4, LAM)


def los_scenario(**kw):
    return evaluate.EvalScenario(
        geometry=kw.pop("geometry", upa()),
        bs=channel.BsGeometry(4, LAM / 2, LAM),
        angles=channel.ScenarioAngles(-PI / 3, PI / 3, PI / 3),
        channel_kind="los",
        users_seed=5,
        design_seed=5,
        **kw,
    )


def rician_scenario(**kw):
    return evaluate.EvalScenario(
        geometry=kw.pop("geometry", upa()),
        bs=channel.BsGeometry(4, LAM / 2, LAM),
        angles=channel.ScenarioAngles(-PI / 3, PI / 3, PI / 3),
        channel_kind="rician",
        rician=channel.RicianParams(3.0, PI / 18, rng_seed=20),
        users_seed=5,
        design_seed=5,
        **kw,
    )


def test_pathloss_examples():
    assert evaluate.pathloss_db(1.0) == pytest.approx(-37.5)
    assert evaluate.pathloss_db(10.0) == pytest.approx(-59.5)
    assert evaluate.pathloss_db(50.0) == pytest.approx(-74.88, abs=0.005)
    with pytest.raises(ValueError):
        evaluate.pathloss_db(0.0)
    with pytest.raises(ValueError):
        evaluate.pathloss_db(-3.0)


def test_spectral_efficiency():
    assert evaluate.spectral_efficiency(0.0) == 0.0
    assert evaluate.spectral_efficiency(1.0) == pytest.approx(1.0)
    assert evaluate.spectral_efficiency(3.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        evaluate.spectral_efficiency(-0.1)


def test_sample_users_bounds_and_determinism():
    budget = evaluate.LinkBudget()
    users = evaluate.sample_users(1000, budget, seed=3)
    assert len(users) == 1000
    for u in users:
        assert 50.0 <= u.d <= 80.0
        assert -PI / 3 <= u.direction.azimuth <= PI / 3
        assert -PI / 6 <= u.direction.elevation <= PI / 6
    again = evaluate.sample_users(1000, budget, seed=3)
    assert all(a.d == b.d and a.direction == b.direction for a, b in zip(users, again))
    big = evaluate.sample_users(10_000, budget, seed=1)
    assert np.mean([u.d for u in big]) == pytest.approx(65.0, abs=1.0)
    with pytest.raises(ValueError):
        evaluate.sample_users(0, budget, seed=1)


def test_snr_los_golay_depends_only_on_gamma():
    scn = los_scenario()
    cfg = evaluate.golay_config(scn.geometry)
    u1 = evaluate.UserSample(60.0, surface.Direction(0.4, 0.2))
    u2 = evaluate.UserSample(60.0, surface.Direction(-0.4, -0.2))  # same element gain
    s1 = evaluate.snr_los(cfg, scn.geometry, scn.bs, scn.angles, scn.budget, u1)
    s2 = evaluate.snr_los(cfg, scn.geometry, scn.bs, scn.angles, scn.budget, u2)
    assert s1 == pytest.approx(s2, rel=1e-12)
    g = evaluate.gamma_los(scn.bs, scn.angles, scn.budget, 60.0, 0.4, 0.2)
    assert s1 == pytest.approx(float(g * 256.0), rel=1e-9)


def test_snr_los_vanishes_without_power():
    scn = los_scenario(budget=evaluate.LinkBudget(p_t_dbm=-400.0))
    cfg = evaluate.golay_config(scn.geometry)
    u = evaluate.UserSample(60.0, surface.Direction(0.0, 0.0))
    assert evaluate.snr_los(cfg, scn.geometry, scn.bs, scn.angles, scn.budget, u) < 1e-20


def test_snr_los_budget_composition():
    scn = los_scenario()
    cfg = evaluate.golay_config(scn.geometry)
    user = evaluate.UserSample(50.0, surface.Direction(0.0, 0.0))
    got = evaluate.snr_los(cfg, scn.geometry, scn.bs, scn.angles, scn.budget, user)
    # compose the link budget by hand in dB
    db = (10 * np.log10(4)                      # transmit array gain
          + 30.0 - 30.0                         # P_T in dBW
          + evaluate.pathloss_db(50.0) * 2      # both hops at 50 m
          + surface.element_gain_db(-PI / 3, 0.0)
          + surface.element_gain_db(PI / 3, PI / 3)
          + surface.element_gain_db(0.0, 0.0)
          - (-110.0 - 30.0))
    expected = 10 ** (db / 10) * 256.0
    assert got == pytest.approx(expected, rel=1e-9)


def test_snr_arbitrary_reduces_to_los():
    scn = los_scenario(geometry=upa(4, 4))
    rng = np.random.default_rng(12)
    cfg = surface.ConfigPair(np.exp(1j * rng.uniform(0, 2 * PI, 8)),
                             np.exp(1j * rng.uniform(0, 2 * PI, 8)))
    real = scn.realization()
    user = evaluate.UserSample(61.0, surface.Direction(0.35, -0.1))
    a = evaluate.snr_arbitrary(cfg, real, scn.geometry, scn.budget, user)
    b = evaluate.snr_los(cfg, scn.geometry, scn.bs, scn.angles, scn.budget, user)
    assert a == pytest.approx(b, rel=1e-9)


def test_snr_arbitrary_zero_channel():
    scn = los_scenario(geometry=upa(4, 4))
    cfg = surface.ConfigPair(np.ones(8, dtype=complex), np.ones(8, dtype=complex))
    zero = channel.ChannelRealization(np.zeros(8, complex), np.zeros(8, complex), "test")
    user = evaluate.UserSample(55.0, surface.Direction(0.0, 0.0))
    assert evaluate.snr_arbitrary(cfg, zero, scn.geometry, scn.budget, user) == 0.0


def test_snr_arbitrary_frozen_fixture():
    """Regression lock on a fixed-seed Rician draw."""
    scn = rician_scenario(geometry=upa(4, 4))
    cfg = surface.ConfigPair(np.ones(8, dtype=complex), np.ones(8, dtype=complex))
    user = evaluate.UserSample(60.0, surface.Direction(0.25, 0.1))
    got = evaluate.snr_arbitrary(cfg, scn.realization(), scn.geometry, scn.budget, user)
    again = evaluate.snr_arbitrary(cfg, scn.realization(), scn.geometry, scn.budget, user)
    assert got == again
    assert got == pytest.approx(FROZEN_RICIAN_SNR, rel=1e-12)


FROZEN_RICIAN_SNR = 2.2622688599573975  # fixed-seed draw, locked at generation time


def test_design_grid_size():
    scn = rician_scenario()
    az, el = evaluate._design_grid(scn)
    assert az.size == 10_000 and el.size == 10_000


def test_run_scheme_user_specific_peaks_at_target():
    users = evaluate.sample_users(50, evaluate.LinkBudget(), seed=9)
    target = users[17].direction
    scn = los_scenario(user_specific_target=target)
    rep = evaluate.run_scheme("UserSpecific", scn, users)
    assert int(np.argmax(rep.se_bpshz)) == 17


def test_run_scheme_rejects_incompatible():
    users = evaluate.sample_users(5, evaluate.LinkBudget(), seed=2)
    scn = rician_scenario()
    with pytest.raises(ValueError):
        evaluate.run_scheme("Proposed-Golay", scn, users)
    with pytest.raises(ValueError):
        evaluate.run_scheme("Nonsense", los_scenario(), users)
    with pytest.raises(ValueError):
        evaluate.run_scheme("Proposed-Golay", los_scenario(), [])


def test_report_csv_and_summary(tmp_path):
    users = evaluate.sample_users(20, evaluate.LinkBudget(), seed=4)
    scn = los_scenario()
    rep = evaluate.run_scheme("Proposed-Golay", scn, users)
    assert np.all(rep.se_bpshz >= 0)
    cdf = rep.cdf_points()
    ps = [p for _, p in cdf]
    assert ps == sorted(ps) and ps[-1] == pytest.approx(1.0)
    ses = [s for s, _ in cdf]
    assert ses == sorted(ses)
    f1, f2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    rep.write_csv(f1)
    rep.write_csv(f2)
    assert f1.read_bytes() == f2.read_bytes()
    header = f1.read_text().splitlines()[0]
    assert header == "user_id,d_m,phi_rad,theta_rad,snr_linear,se_bpshz"
    j1, j2 = tmp_path / "s1.json", tmp_path / "s2.json"
    rep.write_summary_json(j1)
    rep.write_summary_json(j2)
    assert j1.read_bytes() == j2.read_bytes()


def test_min_se_sweep_monotone_and_linear_in_power():
    users = evaluate.sample_users(30, evaluate.LinkBudget(), seed=8)
    scn = los_scenario()
    cfg = evaluate.golay_config(scn.geometry)
    rows = evaluate.min_se_sweep({"Proposed-Golay": cfg}, [20, 25, 30, 35, 40], scn, users)
    vals = [r["min_se_bpshz"] for r in rows]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    # SNR linearity: re-evaluating with a shifted budget matches the sweep row
    scn2 = los_scenario(budget=evaluate.LinkBudget(p_t_dbm=40.0))
    rep = evaluate.run_scheme("Proposed-Golay", scn2, users, config=cfg)
    assert rep.min_se == pytest.approx(vals[-1], rel=1e-9)


def test_fraction_better():
    a = evaluate.SeReport("A", 0, np.zeros(4), np.zeros(4), np.zeros(4),
                          np.zeros(4), np.array([1.0, 2.0, 3.0, 4.0]))
    b = evaluate.SeReport("B", 0, np.zeros(4), np.zeros(4), np.zeros(4),
                          np.zeros(4), np.array([2.0, 1.0, 1.0, 5.0]))
    assert evaluate.fraction_better(a, b) == pytest.approx(0.5)


def test_golay_config_shapes():
    cfg = evaluate.golay_config(upa())
    assert cfg.n == 128
    g = upa()
    assert golay.is_golay_pair_2d(cfg.matrix_h(g), cfg.matrix_v(g)).is_pair
    line = surface.RisGeometry("ula-interleaved", 128, 1, LAM / 4, LAM / 4, LAM)
    cfg = evaluate.golay_config(line)
    assert golay.is_golay_pair_1d(cfg.phi_h, cfg.phi_v).is_pair
    with pytest.raises(ValueError):
        evaluate.golay_config(surface.RisGeometry("ula-interleaved", 12, 1,
                                                  LAM / 4, LAM / 4, LAM))


def test_uni_geometry_and_effective():
    scn = los_scenario()
    ugeo = scn.uni_geometry()
    assert ugeo.layout == "upa-uni-polarized"
    assert ugeo.total_elements == scn.geometry.total_elements
    h = scn.uni_effective()
    assert h.shape == (256,)
    # LoS uni effective is the steering vector scaled by gain * sqrt(M)
    a = surface.steering_vector(ugeo, scn.incident)
    scale = channel.backhaul_gain(scn.angles) * 2.0
    np.testing.assert_allclose(np.abs(h), scale, atol=1e-9)
    np.testing.assert_allclose(h / a, h[0] / a[0], atol=1e-9)


def test_design_configuration_benchmark_smoke():
    users = evaluate.sample_users(25, evaluate.LinkBudget(), seed=3)
    scn = los_scenario(geometry=upa(4, 4),
                       settings=optimizer.OptimizerSettings(l1_max=8, l2_max=50, rng_seed=0),
                       maxmin_grid=(9, 9))
    for scheme in ("DP-MaxSum", "DP-MaxMin"):
        cfg = evaluate.design_configuration(scheme, scn, users)
        assert isinstance(cfg, surface.ConfigPair)
        rep = evaluate.run_scheme(scheme, scn, users, config=cfg)
        assert rep.min_se >= 0
    up = evaluate.design_configuration("UP-MaxMin", scn, users)
    assert up.shape == (16,)
    rep = evaluate.run_scheme("UP-MaxMin", scn, users, config=up)
    assert rep.min_se >= 0
