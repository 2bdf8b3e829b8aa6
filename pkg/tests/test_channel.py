import numpy as np
import pytest

from cfisac.channel import (channel_metric, dump_channels_csv, gen_comm_channels,
                            load_channels_csv, normalized_path_loss, sensing_paths,
                            uca_steering)
from cfisac.scenario import SPEED_OF_LIGHT, ScenarioConfig, build_scenario


WAVELEN = SPEED_OF_LIGHT / 3.5e9


def test_steering_single_element_is_one():
    assert np.array_equal(uca_steering(0.7, -0.2, 1, WAVELEN), np.array([1.0 + 0j]))


def test_steering_overhead_elevation_is_flat():
    a = uca_steering(1.1, np.pi / 2, 8, WAVELEN)
    assert np.allclose(a, np.ones(8), atol=1e-12)


def test_steering_matches_elementwise_formula():
    # independent scalar evaluation of each entry
    M, az, el = 4, 0.0, 0.0
    a = uca_steering(az, el, M, WAVELEN)
    radius = WAVELEN / (4 * np.sin(np.pi / M))
    for m in range(M):
        expected = np.exp(1j * (2 * np.pi * radius / WAVELEN) * np.cos(el)
                          * np.cos(az - 2 * np.pi * m / M))
        assert a[m] == pytest.approx(expected, abs=1e-12)


def test_steering_norm_squared_is_element_count():
    for M in (1, 2, 5, 16):
        a = uca_steering(0.3, 0.1, M, WAVELEN)
        assert np.linalg.norm(a) ** 2 == pytest.approx(M, rel=1e-12)
        assert np.allclose(np.abs(a), 1.0)


def test_los_limit_recovers_steering_vector():
    cfg = ScenarioConfig(seed=2, rician_k_factor=1e9)
    geo = build_scenario(cfg)
    ch = gen_comm_channels(geo, cfg)
    pl = normalized_path_loss(geo, cfg)
    a0 = geo.tx_set[0]
    steer = uca_steering(geo.az_ap_ue[a0, 0], geo.el_ap_ue[a0, 0],
                         cfg.antennas_per_ap, cfg.carrier_wavelength_m)
    h = ch.h(a0, 0) / np.sqrt(pl[0, 0])
    assert np.allclose(h, steer, atol=1e-3)


def test_rayleigh_moment_matches_antenna_count():
    # K_r = 0: E||h||^2 / PL = M, Monte-Carlo over fresh seeds
    cfg = ScenarioConfig(seed=0, rician_k_factor=0.0, ue_count=1)
    geo = build_scenario(cfg)
    pl = normalized_path_loss(geo, cfg)
    a0 = geo.tx_set[0]
    draws = []
    for s in range(10_000):
        ch = gen_comm_channels(geo, cfg, seed=s)
        draws.append(np.linalg.norm(ch.h(a0, 0)) ** 2 / pl[0, 0])
    assert np.mean(draws) == pytest.approx(cfg.antennas_per_ap, rel=0.03)


def test_path_loss_monotone_in_distance():
    cfg = ScenarioConfig(seed=1, ue_count=2)
    geo = build_scenario(cfg, ue_positions=[[100.0, 0.0], [200.0, 0.0]])
    pl = normalized_path_loss(geo, cfg)
    a_near = geo.tx_set[0]
    k = geo.tx_set.index(a_near)
    d = geo.d_ap_ue[a_near]
    near, far = (0, 1) if d[0] < d[1] else (1, 0)
    assert pl[k, near] > pl[k, far]


def test_channel_metric_examples():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 6))
                        + 1j * np.random.default_rng(1).standard_normal((6, 6)))
    H = 5.0 * q[:3]                       # orthonormal rows scaled by 5
    assert channel_metric(H) == pytest.approx(1.0, abs=1e-12)
    H2 = np.zeros((2, 4), dtype=complex)
    H2[0, 0], H2[1, 1] = 2.0, 1.0
    assert channel_metric(H2) == pytest.approx(0.5, abs=1e-12)


def test_channel_metric_matches_svd_oracle():
    rng = np.random.default_rng(7)
    H = rng.standard_normal((6, 10)) + 1j * rng.standard_normal((6, 10))
    s = np.linalg.svd(H, compute_uv=False)
    assert channel_metric(H) == pytest.approx(s.min() / s.max(), abs=1e-9)
    assert 0.0 <= channel_metric(H) <= 1.0


def test_channel_metric_rejects_zero_matrix():
    with pytest.raises(ValueError):
        channel_metric(np.zeros((2, 3)))


def test_channels_reproducible_and_row_convention():
    cfg = ScenarioConfig(seed=5)
    geo = build_scenario(cfg)
    c1 = gen_comm_channels(geo, cfg)
    c2 = gen_comm_channels(geo, cfg)
    for a in c1.tx_aps:
        assert np.array_equal(c1.H[a], c2.H[a])
        # row u is the conjugate transpose of h_au
        assert np.array_equal(np.conj(c1.h(a, 0)), c1.H[a][0])


def test_ue_on_top_of_ap_rejected():
    cfg = ScenarioConfig(seed=3, ue_count=1, ap_height_m=1.5, ue_height_m=1.5)
    geo0 = build_scenario(cfg)
    geo = build_scenario(cfg, ue_positions=[geo0.ap_positions[geo0.tx_set[0]]])
    with pytest.raises(ValueError, match="degenerate"):
        gen_comm_channels(geo, cfg)


def test_sensing_paths_use_configured_rcs_and_count():
    cfg = ScenarioConfig(seed=4, ap_count=4, rcs_var=0.5)
    geo = build_scenario(cfg)
    paths = sensing_paths(geo, cfg)
    assert len(paths) == 3                 # 3 tx APs, 1 rx AP
    for p in paths:
        assert p.gain_std ** 2 == pytest.approx(0.5, rel=1e-12)
        assert p.doppler_hz == 0.0
        assert np.allclose(np.abs(p.tx_steering), 1.0)


def test_sensing_delay_is_route_length_over_c():
    cfg = ScenarioConfig(seed=4)
    geo = build_scenario(cfg)
    for p in sensing_paths(geo, cfg):
        expected = (geo.d_ap_target[p.tx_ap] + geo.d_ap_target[p.rx_ap]) / SPEED_OF_LIGHT
        assert p.delay_s == pytest.approx(expected, rel=1e-12)


def test_channel_csv_round_trip(tmp_path):
    cfg = ScenarioConfig(seed=6, ue_count=3, antennas_per_ap=4)
    geo = build_scenario(cfg)
    ch = gen_comm_channels(geo, cfg)
    path = tmp_path / "ch.csv"
    dump_channels_csv(ch, path)
    loaded = load_channels_csv(path)
    for a in ch.tx_aps:
        assert np.array_equal(loaded.H[a], ch.H[a])
