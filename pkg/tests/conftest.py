import numpy as np
import pytest

from wpcn.model import NetworkConfig, build_geometry, sample_channels


def make_cfg(K=2, N=2, M_h=2, M=2, gamma=0.5, theta=60.0, d_far=10.0, **kw):
    cfg = NetworkConfig(K=K, N=N, M_h=M_h, M=M, **kw)
    return cfg.with_geometry(build_geometry(cfg, gamma=gamma, theta_deg=theta,
                                            d_far=d_far))


def random_instance(rng, K=None, N=None, M=None):
    """Random desk-scale instance in a well-conditioned power regime."""
    from wpcn.model import build_disk_geometry

    K = K or int(rng.integers(1, 4))
    N = N or int(rng.integers(2, 4))
    M = M or int(rng.integers(1, 5))
    if N == 2:
        cfg = make_cfg(K=K, N=N, M_h=M, M=M,
                       gamma=float(rng.uniform(0.3, 0.8)),
                       theta=float(rng.uniform(20, 320 / K if K > 1 else 300)),
                       d_far=float(rng.uniform(5, 9)))
    else:
        cfg = NetworkConfig(K=K, N=N, M_h=M, M=M)
        cfg = cfg.with_geometry(
            build_disk_geometry(cfg, seed=int(rng.integers(0, 2**31)),
                                radius_m=3.0, center_dist_m=8.0,
                                center_spacing_m=6.0))
    channels = sample_channels(cfg, seed=int(rng.integers(0, 2**31)))
    return cfg, channels


def random_factors(rng, cfg, n, scale=1e-2):
    """Random transmit-covariance factors for slot tau3_n (user side)."""
    out = []
    for j in range(cfg.K):
        m = cfg.M[j][n]
        out.append(scale * (rng.standard_normal((m, m))
                            + 1j * rng.standard_normal((m, m))) / np.sqrt(2))
    return out


def random_ch_factors(rng, cfg, scale=1e-2):
    """Random CH covariance factors for one tau4 slot."""
    out = []
    for j in range(cfg.K):
        m = cfg.M[j][cfg.n_ch]
        out.append(scale * (rng.standard_normal((m, m))
                            + 1j * rng.standard_normal((m, m))) / np.sqrt(2))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
