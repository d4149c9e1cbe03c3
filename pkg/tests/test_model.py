import json

import numpy as np
import pytest

from wpcn.model import (
    ChannelSet,
    EhParams,
    GeometryError,
    NetworkConfig,
    build_disk_geometry,
    build_geometry,
    config_from_dict,
    config_to_dict,
    sample_channels,
)


def test_default_ray_layout_distances():
    cfg = NetworkConfig(K=4, N=2, M_h=4, M=4)
    geo = build_geometry(cfg, gamma=0.5, theta_deg=30)
    # far user at 10 m, CH at 5 m, in-cluster separation 5 m
    for k in range(4):
        assert geo.d_hap_user[k][0] == pytest.approx(10.0)
        assert geo.d_hap_user[k][1] == pytest.approx(5.0)
        assert geo.d_user_ch[k][0][k] == pytest.approx(5.0)


def test_cross_distance_law_of_cosines():
    cfg = NetworkConfig(K=2, N=2, M_h=1, M=1)
    geo = build_geometry(cfg, gamma=0.5, theta_deg=90)
    # user (0,0) at 10 m on one ray, CH 1 at 5 m on a perpendicular ray
    assert geo.d_user_ch[1][0][0] == pytest.approx(np.sqrt(125.0))


def test_gamma_one_floors_at_reference_distance():
    # co-located CH and member: the separation clamps to d0 where the
    # path-loss anchor sits, instead of a zero distance
    cfg = NetworkConfig(K=2, N=2, M_h=1, M=1)
    geo = build_geometry(cfg, gamma=1.0, theta_deg=90)
    assert geo.d_user_ch[0][0][0] == pytest.approx(geo.d0)
    assert geo.d_hap_user[0][1] == pytest.approx(10.0)


def test_geometry_rejects_bad_parameters():
    cfg = NetworkConfig(K=3, N=2, M_h=1, M=1)
    with pytest.raises(GeometryError):
        build_geometry(cfg, gamma=0.0, theta_deg=30)
    with pytest.raises(GeometryError):
        build_geometry(cfg, gamma=1.2, theta_deg=30)
    with pytest.raises(GeometryError):
        build_geometry(cfg, gamma=0.5, theta_deg=130)  # >360/K
    with pytest.raises(GeometryError):
        build_geometry(cfg, gamma=0.5, theta_deg=30, d_far=0.5)


def test_channel_dimensions_and_determinism():
    cfg = NetworkConfig(K=2, N=3, M_h=3, M=((2, 3, 2), (1, 2, 4)))
    cfg = cfg.with_geometry(build_disk_geometry(cfg, seed=0))
    a = sample_channels(cfg, seed=7)
    b = sample_channels(cfg, seed=7)
    a.validate(cfg)
    for k in range(2):
        for n in range(3):
            assert a.H_hat[k][n].shape == (cfg.M[k][n], 3)
            np.testing.assert_array_equal(a.H_hat[k][n], b.H_hat[k][n])
    for k in range(2):
        for n in range(2):
            for i in range(2):
                assert a.G_hat[k][n][i].shape == (cfg.M[k][2], cfg.M[i][n])
                np.testing.assert_array_equal(a.G_hat[k][n][i], b.G_hat[k][n][i])


def test_perfect_csi_zero_error_variance():
    cfg = NetworkConfig(K=1, N=2, M_h=2, M=2, rho_h=1.0, rho_g=1.0)
    cfg = cfg.with_geometry(build_geometry(cfg, gamma=0.5, theta_deg=30))
    ch = sample_channels(cfg, seed=0)
    assert ch.var_h_delta[0][0] == 0.0
    assert ch.var_g_delta[0][0][0] == 0.0


def test_empirical_variance_split():
    # per-entry estimate variance = rho^2 * pathloss over >= 1e5 pooled
    # generator entries, within 2%; path-loss power 0.01 * 10^-3 at 10 m
    cfg = NetworkConfig(K=1, N=2, M_h=32, M=32, rho_h=0.95, rho_g=0.95)
    cfg = cfg.with_geometry(build_geometry(cfg, gamma=0.5, theta_deg=30))
    total = 0.01 * 10.0**-3
    entries = []
    for s in range(120):
        ch = sample_channels(cfg, seed=s)
        entries.append(ch.H_hat[0][0].ravel())  # 1024 entries per draw
    pool = np.concatenate(entries)
    assert pool.size >= 100_000
    emp = float(np.mean(np.abs(pool) ** 2))
    assert emp == pytest.approx(0.95**2 * total, rel=0.02)
    assert emp / total == pytest.approx(0.9025, rel=0.02)
    # the stated error variance matches the split exactly
    ch = sample_channels(cfg, seed=0)
    assert ch.var_h_delta[0][0] == pytest.approx((1 - 0.95**2) * total, rel=1e-12)


def test_disk_geometry_ch_rules():
    cfg = NetworkConfig(K=3, N=4, M_h=2, M=2)
    hap = build_disk_geometry(cfg, seed=5, ch_rule="hap")
    cen = build_disk_geometry(cfg, seed=5, ch_rule="center")
    # CH sits at index N-1; under the hap rule it is the nearest to the HAP
    for k in range(3):
        assert hap.d_hap_user[k][3] == min(hap.d_hap_user[k])
    flat = [d for blk in cen.d_user_ch for row in blk for d in row]
    assert min(flat) >= cen.d0


def test_eh_params_validation():
    with pytest.raises(ValueError):
        EhParams(a=0.1, b=-0.9)          # nonlinear needs a < 0
    with pytest.raises(ValueError):
        EhParams(mode="linear", zeta=1.5)
    with pytest.raises(ValueError):
        EhParams(p_floor=0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(K=0)
    with pytest.raises(ValueError):
        NetworkConfig(N=1)
    with pytest.raises(ValueError):
        NetworkConfig(tau1=1.0)
    with pytest.raises(ValueError):
        NetworkConfig(rho_h=1.5)


def test_config_json_round_trip(tmp_path):
    cfg = NetworkConfig(K=2, N=2, M_h=3, M=2, p0=2.5, tau1=0.05)
    cfg = cfg.with_geometry(build_geometry(cfg, gamma=0.6, theta_deg=45))
    d = config_to_dict(cfg)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(d))
    back = config_from_dict(json.loads(path.read_text()))
    assert back.K == 2 and back.M == ((2, 2), (2, 2))
    assert back.p0 == pytest.approx(2.5)
    assert back.geometry.d_hap_user == cfg.geometry.d_hap_user


def test_assume_perfect_zeroes_error_variances():
    cfg = NetworkConfig(K=2, N=2, M_h=2, M=2)
    cfg = cfg.with_geometry(build_geometry(cfg, gamma=0.5, theta_deg=60))
    ch = sample_channels(cfg, seed=1)
    perf = ch.assume_perfect()
    assert perf.var_h_delta[0][0] == 0.0
    assert perf.var_g_delta[1][0][0] == 0.0
    np.testing.assert_array_equal(perf.H_hat[0][0], ch.H_hat[0][0])
